from __future__ import annotations

import numpy as np

NORMALIZATIONS = ("full", "masked")


def broadcast_mask(mask: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Broadcast a spatial mask (h, w) or per-sample (B, h, w) over a (B, C, h, w) or (C, h, w) tensor."""
    mask = np.asarray(mask, dtype=np.float64)
    if len(shape) == 4 and mask.ndim == 3:
        mask = mask[:, None, :, :]
    try:
        return np.broadcast_to(mask, shape)
    except ValueError:
        raise ValueError(f"mask of shape {mask.shape} does not broadcast to {shape}") from None


def loss_denominator(mask: np.ndarray, normalization: str) -> float:
    if normalization == "full":
        return float(mask.size)
    if normalization == "masked":
        return max(float(np.sum(mask * mask)), 1.0)
    raise ValueError(f"normalization must be one of {NORMALIZATIONS}, got {normalization!r}")


def masked_mse(eps: np.ndarray, eps_hat: np.ndarray, mask: np.ndarray, normalization: str = "full") -> float:
    """‖mask ⊙ (eps - eps_hat)‖² divided by the element count.

    With ``normalization="masked"`` the divisor is the number of masked
    elements instead (an all-zero mask then gives 0).
    """
    eps = np.asarray(eps, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if eps.shape != eps_hat.shape:
        raise ValueError(f"shape mismatch: {eps.shape} vs {eps_hat.shape}")
    m = broadcast_mask(mask, eps.shape)
    d = eps - eps_hat
    return float(np.sum((m * m) * (d * d)) / loss_denominator(m, normalization))


def mse(eps: np.ndarray, eps_hat: np.ndarray) -> float:
    eps = np.asarray(eps, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if eps.shape != eps_hat.shape:
        raise ValueError(f"shape mismatch: {eps.shape} vs {eps_hat.shape}")
    d = eps - eps_hat
    return float(np.sum(d * d) / d.size)
