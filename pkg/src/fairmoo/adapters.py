"""Low-rank adapters on a frozen toy denoiser: W_eff = W_base + β·B·A per target layer."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diffusion_toy.denoiser import LAYERS, Denoiser
from .numerics import ParamVector, Var, load_tensor, save_tensor
from .numerics import autodiff as ad


class AdapterError(ValueError):
    pass


@dataclass(frozen=True)
class AdapterSpec:
    rank: int = 8
    beta: float = 0.4
    targets: tuple[str, ...] = LAYERS


@dataclass
class AdapterParams:
    spec: AdapterSpec
    A: dict[str, np.ndarray]  # layer -> (rank, fan_in)
    B: dict[str, np.ndarray]  # layer -> (fan_out, rank)
    seed: int = 0

    def to_vector(self) -> ParamVector:
        arrays = {}
        for layer in self.spec.targets:
            arrays[f"{layer}.A"] = self.A[layer]
            arrays[f"{layer}.B"] = self.B[layer]
        return ParamVector.from_arrays(arrays)

    def with_vector(self, theta: ParamVector) -> AdapterParams:
        arrs = theta.arrays()
        return AdapterParams(
            self.spec,
            {layer: arrs[f"{layer}.A"] for layer in self.spec.targets},
            {layer: arrs[f"{layer}.B"] for layer in self.spec.targets},
            self.seed,
        )

    def delta(self, layer: str) -> np.ndarray:
        return self.B[layer] @ self.A[layer]


@dataclass(frozen=True)
class ParamPartition:
    frozen: tuple[str, ...]
    trainable: tuple[str, ...]
    all_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        overlap = set(self.frozen) & set(self.trainable)
        if overlap:
            raise AdapterError(f"parameters both frozen and trainable: {sorted(overlap)}")
        covered = set(self.frozen) | set(self.trainable)
        if self.all_names and covered != set(self.all_names):
            raise AdapterError("partition does not cover every model parameter")


def effective_weights(base: Denoiser, adapter: AdapterParams, beta: float) -> dict[str, np.ndarray]:
    weights = dict(base.params)
    for layer in adapter.spec.targets:
        weights[f"{layer}.W"] = base.params[f"{layer}.W"] + beta * adapter.delta(layer)
    return weights


def combined_forward(base: Denoiser, adapter: AdapterParams, beta: float, x: np.ndarray) -> np.ndarray:
    """Base network with each target layer's weight replaced by W + β·B·A."""
    h = np.asarray(x, dtype=np.float64)
    for i, layer in enumerate(LAYERS):
        W = base.params[f"{layer}.W"]
        if layer in adapter.spec.targets:
            W = W + beta * adapter.delta(layer)
        h = h @ W.T + base.params[f"{layer}.b"]
        if i < len(LAYERS) - 1:
            h = np.tanh(h)
    if not np.all(np.isfinite(h)):
        raise FloatingPointError("adapted forward produced non-finite output")
    return h


class AdaptedDenoiser:
    """Frozen base plus trainable adapter; exposes the same training interface as :class:`Denoiser`."""

    def __init__(self, base: Denoiser, adapter: AdapterParams, beta: float | None = None):
        self.base = base
        self.adapter = adapter
        self.beta = adapter.spec.beta if beta is None else float(beta)
        self.cfg = base.cfg

    def predict(self, x: np.ndarray) -> np.ndarray:
        return combined_forward(self.base, self.adapter, self.beta, x)

    def trainable(self) -> ParamVector:
        return self.adapter.to_vector()

    def frozen(self) -> dict[str, np.ndarray]:
        return dict(self.base.params)

    def with_trainable(self, theta: ParamVector) -> AdaptedDenoiser:
        return AdaptedDenoiser(self.base, self.adapter.with_vector(theta), self.beta)

    def partition(self) -> ParamPartition:
        frozen = tuple(self.base.params)
        trainable = tuple(self.trainable().names)
        return ParamPartition(frozen, trainable, frozen + trainable)

    def graph(self, v: dict[str, Var], x) -> Var:
        h = x
        for i, layer in enumerate(LAYERS):
            W, b = v[f"{layer}.W"], v[f"{layer}.b"]
            if layer in self.adapter.spec.targets:
                h = ad.lowrank_affine(h, W, b, v[f"{layer}.A"], v[f"{layer}.B"], self.beta)
            else:
                h = ad.affine(h, W, b)
            if i < len(LAYERS) - 1:
                h = ad.tanh(h)
        return h


def attach_adapter(base: Denoiser, spec: AdapterSpec, seed: int):
    """Fresh adapter: A ~ N(0, 1/fan_in), B = 0, so the adapted network starts equal to the base."""
    dims = base.cfg.layer_dims()
    if spec.rank < 1:
        raise AdapterError(f"rank must be >= 1, got {spec.rank}")
    rng = np.random.default_rng(seed)
    A, B = {}, {}
    for layer in spec.targets:
        if layer not in dims:
            raise AdapterError(f"unknown target layer {layer!r}; choose from {LAYERS}")
        fan_out, fan_in = dims[layer]
        if spec.rank > min(fan_in, fan_out):
            raise AdapterError(f"rank {spec.rank} exceeds min(fan_in, fan_out) = {min(fan_in, fan_out)} for {layer}")
        A[layer] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(spec.rank, fan_in))
        B[layer] = np.zeros((fan_out, spec.rank))
    params = AdapterParams(spec, A, B, seed)
    model = AdaptedDenoiser(base, params)
    return model, params, model.partition()


def merge_adapter(base: Denoiser, adapter: AdapterParams, beta: float) -> Denoiser:
    """Fold β·B·A into the base weights."""
    return Denoiser(base.cfg, effective_weights(base, adapter, beta))


def save_adapter(directory: str | Path, adapter: AdapterParams) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for layer in adapter.spec.targets:
        save_tensor(directory, f"{layer}.A", adapter.A[layer])
        save_tensor(directory, f"{layer}.B", adapter.B[layer])
    meta = {
        "rank": adapter.spec.rank,
        "beta": adapter.spec.beta,
        "targets": list(adapter.spec.targets),
        "seed": adapter.seed,
    }
    (directory / "adapter.json").write_text(json.dumps(meta, indent=2))
    return directory


def load_adapter(directory: str | Path) -> AdapterParams:
    directory = Path(directory)
    meta = json.loads((directory / "adapter.json").read_text())
    spec = AdapterSpec(int(meta["rank"]), float(meta["beta"]), tuple(meta["targets"]))
    A = {layer: load_tensor(directory, f"{layer}.A") for layer in spec.targets}
    B = {layer: load_tensor(directory, f"{layer}.B") for layer in spec.targets}
    return AdapterParams(spec, A, B, int(meta.get("seed", 0)))
