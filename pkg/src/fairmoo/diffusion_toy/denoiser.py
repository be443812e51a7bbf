"""Dense toy denoiser ε̂(z_t, t, c) and the three region losses over its trainable parameters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fair_moo.bundle import ObjectiveBundle, ObjectiveError
from ..numerics import ParamVector, Tape, Var
from ..numerics import autodiff as ad
from .losses import broadcast_mask, loss_denominator, masked_mse, mse
from .schedule import NoiseSchedule, q_sample

LAYERS = ("fc1", "fc2", "out")


@dataclass(frozen=True)
class DenoiserConfig:
    latent_shape: tuple[int, int, int]  # (C, h, w)
    widths: tuple[int, int] = (256, 256)
    temb_dim: int = 16
    cond_dim: int = 4

    @property
    def out_dim(self) -> int:
        c, h, w = self.latent_shape
        return c * h * w

    @property
    def in_dim(self) -> int:
        return self.out_dim + self.temb_dim + self.cond_dim

    def layer_dims(self) -> dict[str, tuple[int, int]]:
        """(fan_out, fan_in) per layer."""
        w1, w2 = self.widths
        return {"fc1": (w1, self.in_dim), "fc2": (w2, w1), "out": (self.out_dim, w2)}


def timestep_embedding(t, dim: int = 16) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    return np.concatenate([np.sin(t * freqs), np.cos(t * freqs)], axis=1)


def make_inputs(cfg: DenoiserConfig, zt: np.ndarray, t, cond: np.ndarray | None) -> np.ndarray:
    b = zt.shape[0]
    if cond is None:
        cond = np.zeros((b, cfg.cond_dim))
    return np.concatenate(
        [zt.reshape(b, -1), timestep_embedding(t, cfg.temb_dim), np.asarray(cond, dtype=np.float64).reshape(b, -1)],
        axis=1,
    )


def init_params(cfg: DenoiserConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params = {}
    for name, (fan_out, fan_in) in cfg.layer_dims().items():
        params[f"{name}.W"] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_out, fan_in))
        params[f"{name}.b"] = np.zeros(fan_out)
    return params


def mlp_forward(weights: dict[str, np.ndarray], x: np.ndarray) -> np.ndarray:
    h = np.tanh(x @ weights["fc1.W"].T + weights["fc1.b"])
    h = np.tanh(h @ weights["fc2.W"].T + weights["fc2.b"])
    return h @ weights["out.W"].T + weights["out.b"]


class Denoiser:
    """Plain network; every base parameter is trainable."""

    def __init__(self, cfg: DenoiserConfig, params: dict[str, np.ndarray]):
        self.cfg = cfg
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    @classmethod
    def create(cls, cfg: DenoiserConfig, seed: int) -> Denoiser:
        return cls(cfg, init_params(cfg, np.random.default_rng(seed)))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return mlp_forward(self.params, x)

    def trainable(self) -> ParamVector:
        return ParamVector.from_arrays(self.params)

    def frozen(self) -> dict[str, np.ndarray]:
        return {}

    def with_trainable(self, theta: ParamVector) -> Denoiser:
        return Denoiser(self.cfg, theta.arrays())

    def graph(self, v: dict[str, Var], x) -> Var:
        h = ad.tanh(ad.affine(x, v["fc1.W"], v["fc1.b"]))
        h = ad.tanh(ad.affine(h, v["fc2.W"], v["fc2.b"]))
        return ad.affine(h, v["out.W"], v["out.b"])


@dataclass
class TrainBatch:
    z0: np.ndarray  # (B, C, h, w)
    eps: np.ndarray
    t: np.ndarray  # (B,) integer timesteps in [1, T]
    zt: np.ndarray
    face: np.ndarray  # (B, h, w) latent masks
    hand: np.ndarray
    cond: np.ndarray | None = None

    def __post_init__(self):
        if self.z0.shape != self.eps.shape or self.zt.shape != self.z0.shape:
            raise ValueError("z0, eps and zt must share a shape")


def make_batch(z0, eps, t, schedule: NoiseSchedule, face, hand, cond=None) -> TrainBatch:
    t = np.asarray(t, dtype=np.int64).reshape(-1)
    return TrainBatch(np.asarray(z0, float), np.asarray(eps, float), t, q_sample(z0, t, eps, schedule),
                      np.asarray(face, float), np.asarray(hand, float), cond)


def objective_bundle(batch: TrainBatch, model, theta: ParamVector | None = None,
                     normalization: str = "full") -> ObjectiveBundle:
    """(l_global, l_face, l_hand) and their gradients over ``model``'s trainable parameters.

    All three losses come from one shared forward pass.
    """
    theta = model.trainable() if theta is None else theta
    x = make_inputs(model.cfg, batch.zt, batch.t, batch.cond)
    b = batch.eps.shape[0]
    target = batch.eps.reshape(b, -1)
    tape = Tape()
    v = {name: tape.param(arr, name=name) for name, arr in theta.arrays().items()}
    v.update({name: tape.const(arr, name=name) for name, arr in model.frozen().items()})
    out = model.graph(v, x)
    losses = [ad.sq_err(out, target)]
    for region in (batch.face, batch.hand):
        m = broadcast_mask(region, batch.eps.shape).reshape(b, -1)
        losses.append(ad.masked_sq_err(out, target, m, loss_denominator(m, normalization)))
    values, rows = [], []
    for i, loss in enumerate(losses):
        value = float(loss.value.item())
        if not np.isfinite(value):
            raise ObjectiveError(i, f"non-finite loss {value}")
        grads = tape.backward(loss)
        rows.append(np.concatenate([
            grads.get(v[s.name].index, np.zeros(s.shape)).reshape(-1) for s in theta.segments
        ]))
        values.append(value)
    return ObjectiveBundle(np.array(values), np.stack(rows))


def region_losses(model, batch: TrainBatch, normalization: str = "full") -> np.ndarray:
    """Forward-only (l_global, l_face, l_hand) via the model's numpy path."""
    x = make_inputs(model.cfg, batch.zt, batch.t, batch.cond)
    pred = model.predict(x).reshape(batch.eps.shape)
    return np.array([
        mse(batch.eps, pred),
        masked_mse(batch.eps, pred, batch.face, normalization),
        masked_mse(batch.eps, pred, batch.hand, normalization),
    ])
