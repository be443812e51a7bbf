"""Minimum-potential-delay weights: closed form W = K^{-2/3}·1 and a numerical least-squares oracle.

The weights solve (approximately) the fixed-point system K W = c·W^{-1/2} with
K the Gram matrix of the objective gradients and c = (2λ)^{-1/2}; c = 1 for
the usual λ = ½.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..numerics import mat_frac_power, sym_eig, symmetrize
from .bundle import ObjectiveBundle


class IndefiniteGramError(ArithmeticError):
    pass


class OracleError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    eps_reg: float = 1e-10
    w_floor: float = 1e-8
    lagrange_lambda: float = 0.5
    psd_tol: float = 1e-9
    oracle_iters: int = 1000
    oracle_step: float | None = None  # None: start from 1 / ‖J‖_F² at the initial point

    def __post_init__(self):
        if self.eps_reg < 0:
            raise ValueError(f"eps_reg must be >= 0, got {self.eps_reg}")
        if not self.w_floor > 0:
            raise ValueError(f"w_floor must be > 0, got {self.w_floor}")
        if not self.lagrange_lambda > 0:
            raise ValueError(f"lagrange_lambda must be > 0, got {self.lagrange_lambda}")

    @property
    def rhs_scale(self) -> float:
        return 1.0 / math.sqrt(2.0 * self.lagrange_lambda)


@dataclass(frozen=True)
class FairWeights:
    w: np.ndarray
    strategy: str
    floor_applied: bool = False
    residual: float | None = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise ValueError(f"{self.strategy} produced non-finite weights {w}")
        object.__setattr__(self, "w", w)


def gram(bundle: ObjectiveBundle | np.ndarray) -> np.ndarray:
    """K_ij = ∇l_i · ∇l_j, each unordered pair computed once."""
    G = bundle.grads if isinstance(bundle, ObjectiveBundle) else np.atleast_2d(np.asarray(bundle, dtype=np.float64))
    k = G.shape[0]
    K = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            K[i, j] = K[j, i] = float(np.dot(G[i], G[j]))
    return K


def check_psd(K: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    K = symmetrize(K)
    evals, _ = sym_eig(K)
    top = max(float(evals[0]), 0.0)
    if evals[-1] < -tol * top or (top == 0.0 and evals[-1] < 0):
        raise IndefiniteGramError(
            f"Gram matrix is indefinite (eigenvalues {evals.tolist()}); gradients are not a valid Gram set"
        )
    return K


def regularized(K: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    return K + cfg.eps_reg * np.eye(K.shape[0])


def residual(K: np.ndarray, w: np.ndarray, cfg: SolverConfig = SolverConfig()) -> float:
    """‖(K + eps_reg·I) W − c·W^{-1/2}‖₂; infinite when some weight is not positive."""
    w = np.asarray(w, dtype=np.float64)
    if np.any(w <= 0):
        return math.inf
    r = regularized(np.asarray(K, dtype=np.float64), cfg) @ w - cfg.rhs_scale * w ** -0.5
    return float(np.linalg.norm(r))


def mpd_weights_closed(K: np.ndarray, cfg: SolverConfig = SolverConfig()) -> FairWeights:
    K = check_psd(K, cfg.psd_tol)
    # general λ: W = (2λ)^{-1/3} K^{-2/3} 1, which reduces to the plain form at λ = ½
    scale = (2.0 * cfg.lagrange_lambda) ** (-1.0 / 3.0)
    w = scale * (mat_frac_power(K, -2.0 / 3.0, cfg.eps_reg) @ np.ones(K.shape[0]))
    floored = bool(np.any(w < cfg.w_floor))
    w = np.maximum(w, cfg.w_floor)
    return FairWeights(w, "mpd", floored, residual(K, w, cfg))


def _objective(Kr: np.ndarray, c: float, w: np.ndarray) -> tuple[float, np.ndarray]:
    r = Kr @ w - c * w ** -0.5
    J = Kr + np.diag(0.5 * c * w ** -1.5)
    return float(r @ r), 2.0 * (J.T @ r)


def _descend(Kr: np.ndarray, c: float, w0: np.ndarray, cfg: SolverConfig) -> tuple[np.ndarray, float]:
    w = np.maximum(w0, cfg.w_floor)
    f, g = _objective(Kr, c, w)
    if not np.isfinite(f):
        raise OracleError(f"non-finite residual at initial point {w}")
    if cfg.oracle_step is not None:
        step = cfg.oracle_step
    else:
        J = Kr + np.diag(0.5 * c * w ** -1.5)
        step = 1.0 / max(float(np.sum(J * J)), 1e-300)
    halvings = 0
    for _ in range(cfg.oracle_iters):
        if f == 0.0:
            break
        cand = np.maximum(w - step * g, cfg.w_floor)
        moved = w - cand
        if not np.any(moved):
            break
        fc, gc = _objective(Kr, c, cand)
        if np.isfinite(fc) and fc <= f - 1e-4 * float(g @ moved):
            w, f, g = cand, fc, gc
            step *= 2.0
            halvings = 0
        else:
            step *= 0.5
            halvings += 1
            if halvings > 60:
                break
    if not np.isfinite(f):
        raise OracleError("projected descent failed to find a finite residual")
    return w, math.sqrt(f)


def mpd_weights_oracle(K: np.ndarray, cfg: SolverConfig = SolverConfig()) -> FairWeights:
    """Minimise ‖(K + eps_reg·I) W − c·W^{-1/2}‖² over W ≥ w_floor by projected gradient descent.

    Runs from the closed-form weights and from all-ones; the lower final
    residual wins. Accepted steps never increase the residual, so the result
    is never worse than either starting point.
    """
    K = check_psd(K, cfg.psd_tol)
    Kr = regularized(K, cfg)
    c = cfg.rhs_scale
    starts = [mpd_weights_closed(K, cfg).w, np.ones(K.shape[0])]
    best_w, best_r = None, math.inf
    for w0 in starts:
        w, r = _descend(Kr, c, w0, cfg)
        if r < best_r:
            best_w, best_r = w, r
    floored = bool(np.any(best_w <= cfg.w_floor))
    return FairWeights(best_w, "mpd-oracle", floored, residual(K, best_w, cfg))
