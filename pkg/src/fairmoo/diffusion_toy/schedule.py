from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray

    def ab(self, t) -> np.ndarray:
        """ᾱ_t for 1-based timestep(s) ``t``."""
        t = np.asarray(t)
        if np.any(t < 1) or np.any(t > self.T):
            raise ValueError(f"timestep out of range [1, {self.T}]: {t}")
        return self.alpha_bar[t - 1]


def make_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear β schedule; ᾱ is the running product of 1 - β."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    return NoiseSchedule(T, beta, np.cumprod(1.0 - beta))


def noise_latent(z0: np.ndarray, eps: np.ndarray, alpha_bar) -> np.ndarray:
    """√ᾱ·z0 + √(1-ᾱ)·eps; ``alpha_bar`` is a scalar or one value per leading-axis sample."""
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if z0.shape != eps.shape:
        raise ValueError(f"shape mismatch: z0 {z0.shape} vs eps {eps.shape}")
    ab = np.asarray(alpha_bar, dtype=np.float64)
    if ab.ndim == 1:
        ab = ab.reshape((-1,) + (1,) * (z0.ndim - 1))
    return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps


def q_sample(z0: np.ndarray, t, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    return noise_latent(z0, eps, schedule.ab(t))
