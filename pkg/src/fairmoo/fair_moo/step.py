from __future__ import annotations

import numpy as np

from ..numerics import ParamVector
from .bundle import ObjectiveBundle
from .mpd import FairWeights


def aggregate_direction(bundle: ObjectiveBundle, weights: FairWeights | np.ndarray, like: ParamVector | None = None):
    """d = Σ w_i ∇l_i, accumulated in ascending objective order."""
    w = weights.w if isinstance(weights, FairWeights) else np.asarray(weights, dtype=np.float64)
    if w.size != bundle.k:
        raise ValueError(f"{w.size} weights for {bundle.k} objectives")
    d = np.zeros(bundle.dim)
    for i in range(bundle.k):
        d = d + w[i] * bundle.grads[i]
    return like.with_data(d) if like is not None else d


def update_step(theta, d, eta: float):
    """θ − η·d for arrays or matching :class:`ParamVector` s."""
    if not eta > 0:
        raise ValueError(f"learning rate must be positive, got {eta}")
    if isinstance(theta, ParamVector):
        dd = d.data if isinstance(d, ParamVector) else np.asarray(d, dtype=np.float64).reshape(-1)
        if dd.shape != theta.data.shape:
            raise ValueError(f"direction shape {dd.shape} does not match parameters {theta.data.shape}")
        return theta.with_data(theta.data - eta * dd)
    theta = np.asarray(theta, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if d.shape != theta.shape:
        raise ValueError(f"direction shape {d.shape} does not match parameters {theta.shape}")
    return theta - eta * d
