"""Per-step objective weighting strategies: MPD plus the LS / SI / DWA / RLW / UW baselines.

DWA, RLW and UW follow their usual published formulations:

* DWA: w_i = k·softmax(r_i / T) with r_i = l_i(t-1) / l_i(t-2), T = 2; uniform for the first two steps.
* RLW: w = softmax(z), z ~ N(0, I_k), redrawn every step.
* UW: w_i = 1/(2σ_i²) = ½·exp(-s_i) with s_i = log σ_i² trained by gradient descent on
  Σ ½·exp(-s_i)·l_i + ½·s_i.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bundle import ObjectiveBundle
from .mpd import FairWeights, SolverConfig, gram, mpd_weights_closed, mpd_weights_oracle

STRATEGIES = ("mpd", "mpd-oracle", "ls", "global-only", "si", "dwa", "rlw", "uw")
DWA_TEMPERATURE = 2.0


class StrategyError(ValueError):
    pass


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x))
    return e / e.sum()


@dataclass
class StrategyState:
    uw_log_var: np.ndarray | None = None
    uw_lr: float = 1e-2
    history: list[np.ndarray] = field(default_factory=list)


def baseline_weights(strategy: str, losses: Sequence[np.ndarray], state: StrategyState | None = None,
                     rng: np.random.Generator | None = None, *, ls_weights: Sequence[float] | None = None) -> FairWeights:
    """Weights from loss values alone; ``losses`` is the history of k-vectors, most recent last."""
    if not len(losses):
        raise StrategyError("need at least one loss vector")
    cur = np.asarray(losses[-1], dtype=np.float64)
    k = cur.size
    if strategy == "ls":
        w = np.ones(k) if ls_weights is None else np.asarray(ls_weights, dtype=np.float64)
        if w.size != k or np.any(w < 0):
            raise StrategyError(f"LS weights must be {k} non-negative numbers, got {w}")
        return FairWeights(w, "ls")
    if strategy == "global-only":
        w = np.zeros(k)
        w[0] = 1.0
        return FairWeights(w, "global-only")
    if strategy == "si":
        if np.any(cur <= 0):
            raise StrategyError(f"SI needs positive losses, got {cur}")
        return FairWeights(1.0 / cur, "si")
    if strategy == "dwa":
        if len(losses) < 2:
            return FairWeights(np.ones(k), "dwa")
        prev, prev2 = np.asarray(losses[-1], float), np.asarray(losses[-2], float)
        if np.any(prev2 <= 0) or np.any(prev <= 0):
            raise StrategyError("DWA needs positive losses")
        return FairWeights(k * _softmax((prev / prev2) / DWA_TEMPERATURE), "dwa")
    if strategy == "rlw":
        if rng is None:
            raise StrategyError("RLW needs a random generator")
        return FairWeights(_softmax(rng.standard_normal(k)), "rlw")
    if strategy == "uw":
        if state is None:
            raise StrategyError("UW needs a strategy state")
        if state.uw_log_var is None:
            state.uw_log_var = np.zeros(k)
        s = state.uw_log_var
        w = 0.5 * np.exp(-s)
        # d/ds_i [½ e^{-s_i} l_i + ½ s_i]
        state.uw_log_var = s - state.uw_lr * (0.5 - 0.5 * np.exp(-s) * cur)
        return FairWeights(w, "uw")
    raise StrategyError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")


class WeightStrategy:
    """Stateful per-run weight producer: ``strategy(bundle) -> FairWeights``.

    Loss-based baselines see the bundle's losses; DWA uses the losses from
    previous steps.
    """

    def __init__(self, tag: str, *, seed: int = 0, solver: SolverConfig | None = None,
                 ls_weights: Sequence[float] | None = None, uw_lr: float = 1e-2):
        if tag not in STRATEGIES:
            raise StrategyError(f"unknown strategy {tag!r}; choose from {STRATEGIES}")
        self.tag = tag
        self.solver = solver or SolverConfig()
        self.ls_weights = ls_weights
        self.state = StrategyState(uw_lr=uw_lr)
        self.rng = np.random.default_rng([seed, 7])
        self.last_gram: np.ndarray | None = None

    def __call__(self, bundle: ObjectiveBundle) -> FairWeights:
        if self.tag in ("mpd", "mpd-oracle"):
            K = gram(bundle)
            self.last_gram = K
            solve = mpd_weights_closed if self.tag == "mpd" else mpd_weights_oracle
            return solve(K, self.solver)
        if self.tag == "dwa":
            w = baseline_weights("dwa", self.state.history or [bundle.losses], self.state)
            self.state.history = (self.state.history + [bundle.losses])[-2:]
            return w
        return baseline_weights(self.tag, [bundle.losses], self.state, self.rng, ls_weights=self.ls_weights)
