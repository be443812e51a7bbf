"""Parameter update rules applied to the aggregated direction d."""
from __future__ import annotations

import numpy as np

from ..fair_moo import update_step
from ..numerics import ParamVector

OPTIMIZERS = ("sgd", "adam")


class Optimizer:
    """``sgd`` is the plain update θ − η·d. ``adam`` feeds d through Adam moment estimates."""

    def __init__(self, kind: str, lr: float, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        if kind not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {kind!r}")
        self.kind = kind
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None

    def step(self, theta: ParamVector, d) -> ParamVector:
        if self.kind == "sgd":
            return update_step(theta, d, self.lr)
        b1, b2 = self.betas
        g = d.data if isinstance(d, ParamVector) else np.asarray(d, dtype=np.float64).reshape(-1)
        if g.shape != theta.data.shape:
            raise ValueError(f"direction shape {g.shape} does not match parameters {theta.data.shape}")
        if self.m is None:
            self.m = np.zeros_like(g)
            self.v = np.zeros_like(g)
        self.t += 1
        self.m = b1 * self.m + (1 - b1) * g
        self.v = b2 * self.v + (1 - b2) * g * g
        m_hat = self.m / (1 - b1 ** self.t)
        v_hat = self.v / (1 - b2 ** self.t)
        return theta.with_data(theta.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
