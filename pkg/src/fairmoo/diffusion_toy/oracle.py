"""Extended-precision region losses for stacked parameter vectors (finite-difference oracle).

Shares no code with the tape: weights are rebuilt from the flat vector and the
network is evaluated with plain broadcasting matmuls.
"""
from __future__ import annotations

import numpy as np

from ..numerics import finite_diff_stacked
from .denoiser import LAYERS, TrainBatch, make_inputs
from .losses import broadcast_mask, loss_denominator


def _stacked_weights(model, thetas: np.ndarray) -> dict[str, np.ndarray]:
    dtype = thetas.dtype.type
    P = thetas.shape[0]
    arrays = {
        s.name: thetas[:, s.offset : s.offset + s.size].reshape((P,) + s.shape)
        for s in model.trainable().segments
    }
    base = getattr(model, "base", None)
    if base is None:
        return arrays
    weights = {k: v.astype(dtype) for k, v in base.params.items()}
    beta = dtype(model.beta)
    for layer in model.adapter.spec.targets:
        weights[f"{layer}.W"] = weights[f"{layer}.W"] + beta * np.matmul(arrays[f"{layer}.B"], arrays[f"{layer}.A"])
    return weights


def stacked_region_losses(model, batch: TrainBatch, thetas: np.ndarray, normalization: str = "full") -> np.ndarray:
    """(P, 3) matrix of (l_global, l_face, l_hand), one row per parameter vector."""
    dtype = thetas.dtype.type
    P = thetas.shape[0]
    W = _stacked_weights(model, thetas)
    h = make_inputs(model.cfg, batch.zt, batch.t, batch.cond).astype(dtype)
    for i, layer in enumerate(LAYERS):
        b = W[f"{layer}.b"]
        h = np.matmul(h, np.swapaxes(W[f"{layer}.W"], -1, -2)) + (b[:, None, :] if b.ndim == 2 else b)
        if i < len(LAYERS) - 1:
            h = np.tanh(h)
    B = batch.eps.shape[0]
    d = batch.eps.reshape(B, -1).astype(dtype) - h
    d2 = (d * d).reshape(P, -1)
    out = [d2.sum(axis=1) / dtype(d2.shape[1])]
    for region in (batch.face, batch.hand):
        m = broadcast_mask(region, batch.eps.shape).reshape(B, -1)
        denom = loss_denominator(m, normalization)
        mm = (m * m).astype(dtype).reshape(1, -1)
        out.append((mm * d2).sum(axis=1) / dtype(denom))
    return np.stack(out, axis=1)


def fd_region_gradients(model, batch: TrainBatch, theta=None, h: float = 1e-5,
                        normalization: str = "full", chunk: int = 64) -> np.ndarray:
    """(3, n) central-difference gradients of the three region losses."""
    theta = model.trainable() if theta is None else theta
    return finite_diff_stacked(
        lambda thetas: stacked_region_losses(model, batch, thetas, normalization), theta, h, chunk
    )
