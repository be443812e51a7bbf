"""Pareto-stationarity meter and potential-delay diagnostics for a shared update direction."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bundle import ObjectiveBundle
from .mpd import gram

MAX_K = 8


def _grads(bundle) -> np.ndarray:
    if isinstance(bundle, ObjectiveBundle):
        return bundle.grads
    return np.atleast_2d(np.asarray(bundle, dtype=np.float64))


def _edge_min(K: np.ndarray, i: int, j: int) -> tuple[float, float]:
    """Minimum of ‖t g_i + (1-t) g_j‖² over t ∈ [0, 1]; returns (value, t)."""
    a = K[i, i] - 2.0 * K[i, j] + K[j, j]
    t = 0.0 if a <= 0 else min(max((K[j, j] - K[i, j]) / a, 0.0), 1.0)
    val = t * t * K[i, i] + 2.0 * t * (1.0 - t) * K[i, j] + (1.0 - t) ** 2 * K[j, j]
    return val, t


def min_norm_weights(K: np.ndarray, tol: float = 1e-8, max_iter: int = 20000) -> np.ndarray:
    """Simplex weights λ minimising λᵀKλ (away-step Frank–Wolfe with exact line search)."""
    k = K.shape[0]
    lam = np.full(k, 1.0 / k)
    for _ in range(max_iter):
        grad = 2.0 * (K @ lam)
        s = int(np.argmin(grad))
        support = np.flatnonzero(lam > 0)
        v = int(support[np.argmax(grad[support])])
        fw_gap = float(grad @ lam - grad[s])
        if fw_gap <= tol:
            break
        fw_dir = -lam.copy()
        fw_dir[s] += 1.0
        away_dir = lam.copy()
        away_dir[v] -= 1.0
        if fw_gap >= float(grad[v] - grad @ lam):
            d, tmax = fw_dir, 1.0
        else:
            d = away_dir
            tmax = lam[v] / (1.0 - lam[v]) if lam[v] < 1.0 else math.inf
        curv = float(d @ K @ d)
        slope = float(grad @ d)
        t = tmax if curv <= 0 else min(-slope / (2.0 * curv), tmax)
        if t <= 0:
            break
        lam = lam + t * d
        lam[lam < 1e-16] = 0.0
        lam /= lam.sum()
    return lam


def pareto_stationarity(bundle, tol: float = 1e-8) -> float:
    """min over the simplex of ‖Σ λ_i ∇l_i‖."""
    G = _grads(bundle)
    k = G.shape[0]
    if k > MAX_K:
        raise ValueError(f"stationarity meter supports k <= {MAX_K}, got {k}")
    K = gram(G)
    candidates = [min_norm_weights(K, tol)]
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        candidates.append(e)
        for j in range(i + 1, k):
            _, t = _edge_min(K, i, j)
            lam = np.zeros(k)
            lam[i], lam[j] = t, 1.0 - t
            candidates.append(lam)
    return min(float(np.linalg.norm(lam @ G)) for lam in candidates)


@dataclass(frozen=True)
class DelayDiagnostics:
    proj: np.ndarray  # signed projection of d on each gradient direction
    potential_delay: np.ndarray  # 1/proj, NaN where the alignment is not positive
    F: float  # Σ 1/proj, NaN unless every alignment is positive
    F_prime: float  # Σ 1/(∇l_i·d)
    M: float  # max gradient norm
    bound_holds: bool | None  # F ≤ M·F′ + 1e-9; None when undefined
    undefined: np.ndarray  # objectives with ∇l_i·d ≤ 0


def delay_diagnostics(bundle, d: np.ndarray) -> DelayDiagnostics:
    G = _grads(bundle)
    d = np.asarray(getattr(d, "data", d), dtype=np.float64).reshape(-1)
    nd = float(np.linalg.norm(d))
    if nd == 0.0:
        raise ValueError("update direction is zero")
    dots = G @ d
    proj = dots / nd
    norms = np.linalg.norm(G, axis=1)
    undefined = dots <= 0
    with np.errstate(divide="ignore"):
        delay = np.where(undefined, np.nan, 1.0 / np.where(undefined, 1.0, proj))
    M = float(norms.max())
    if undefined.any():
        return DelayDiagnostics(proj, delay, math.nan, math.nan, M, None, undefined)
    F = float(np.sum(1.0 / proj))
    F_prime = float(np.sum(1.0 / dots))
    return DelayDiagnostics(proj, delay, F, F_prime, M, bool(F <= M * F_prime + 1e-9), undefined)
