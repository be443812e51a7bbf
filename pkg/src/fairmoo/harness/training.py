"""Training loop: batch → region losses and gradients → strategy weights → aggregate → update."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..adapters import AdapterError, AdapterParams, AdapterSpec, AdaptedDenoiser, attach_adapter, load_adapter, save_adapter
from ..diffusion_toy import (
    Denoiser,
    DenoiserConfig,
    NoiseSchedule,
    SyntheticSet,
    TrainBatch,
    make_batch,
    make_inputs,
    make_schedule,
    objective_bundle,
    region_losses,
    synth_dataset,
)
from ..fair_moo import (
    ObjectiveError,
    SolverConfig,
    WeightStrategy,
    aggregate_direction,
    gram,
    mpd_weights_closed,
    pareto_stationarity,
)
from ..numerics import value_and_grad
from ..numerics import autodiff as ad
from .config import RunConfig, dump_config
from .optim import Optimizer

log = logging.getLogger(__name__)

METRICS_HEADER = ["step", "l_global", "l_face", "l_hand", "w1", "w2", "w3",
                  "gn1", "gn2", "gn3", "pareto_stat", "cf_residual"]
EVAL_HEADER = ["step", "eval_global", "eval_face", "eval_hand"]

SPLIT_TRAIN, SPLIT_EVAL = 0, 1


class TrainingAborted(RuntimeError):
    def __init__(self, step: int, objective: int | None, message: str):
        where = f"step {step}" + (f", objective {objective}" if objective is not None else "")
        super().__init__(f"training aborted at {where}: {message}")
        self.step = step
        self.objective = objective


class RunIOError(OSError):
    def __init__(self, path: Path, cause: Exception):
        super().__init__(f"could not write {path}: {cause}")
        self.path = path


@dataclass
class MetricsRecord:
    step: int
    l_global: float
    l_face: float
    l_hand: float
    w1: float
    w2: float
    w3: float
    gn1: float
    gn2: float
    gn3: float
    pareto_stat: float
    cf_residual: float
    gram: list[list[float]] = field(default_factory=list)
    floor_applied: bool = False
    eval: dict[str, float] | None = None

    def row(self) -> list[str]:
        return [str(self.step)] + [repr(float(getattr(self, k))) for k in METRICS_HEADER[1:]]


@dataclass
class RunRecord:
    config: RunConfig
    metrics: list[MetricsRecord]
    final_eval: dict[str, float]
    probe_initial: list[float]
    probe_final: list[float]
    clamp_steps: int
    steps: int
    out_dir: str | None = None
    checkpoint: str | None = None
    duration_s: float = 0.0
    adapter: AdapterParams | None = field(default=None, repr=False)

    @property
    def clamp_fraction(self) -> float:
        return self.clamp_steps / self.steps if self.steps else 0.0

    def summary(self) -> dict:
        return {
            "config": self.config.model_dump(mode="json"),
            "final_eval": self.final_eval,
            "probe_initial": self.probe_initial,
            "probe_final": self.probe_final,
            "clamp_steps": self.clamp_steps,
            "steps": self.steps,
            "out_dir": self.out_dir,
            "checkpoint": self.checkpoint,
            "duration_s": self.duration_s,
            "metrics_logged": len(self.metrics),
        }


def denoiser_config(cfg: RunConfig) -> DenoiserConfig:
    n = cfg.latent_size
    return DenoiserConfig((1, n, n), tuple(cfg.widths))


def schedule_of(cfg: RunConfig) -> NoiseSchedule:
    s = cfg.schedule
    return make_schedule(s.T, s.beta_start, s.beta_end)


def solver_of(cfg: RunConfig) -> SolverConfig:
    o = cfg.strategy_options
    return SolverConfig(eps_reg=o.eps_reg, w_floor=o.w_floor)


def derived_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1, np.uint32)[0])


def datasets(cfg: RunConfig) -> tuple[SyntheticSet, SyntheticSet]:
    train = synth_dataset(cfg.train_size, cfg.seed, cfg.image_size, cfg.latent_factor, split=SPLIT_TRAIN)
    evals = synth_dataset(cfg.eval_count, cfg.seed, cfg.image_size, cfg.latent_factor, split=SPLIT_EVAL)
    return train, evals


def sample_batch(data: SyntheticSet, schedule: NoiseSchedule, rng: np.random.Generator, size: int) -> TrainBatch:
    idx = rng.integers(0, len(data), size)
    t = rng.integers(1, schedule.T + 1, size)
    eps = rng.standard_normal(data.z0[idx].shape)
    return make_batch(data.z0[idx], eps, t, schedule, data.face[idx], data.hand[idx], data.cond[idx])


def fixed_batch(data: SyntheticSet, schedule: NoiseSchedule, seed: int, size: int) -> TrainBatch:
    """Deterministic probe batch over the first ``size`` samples."""
    idx = np.arange(min(size, len(data)))
    rng = np.random.default_rng([seed, 4])
    t = rng.integers(1, schedule.T + 1, idx.size)
    eps = rng.standard_normal(data.z0[idx].shape)
    return make_batch(data.z0[idx], eps, t, schedule, data.face[idx], data.hand[idx], data.cond[idx])


def pretrain_base(base: Denoiser, cfg: RunConfig, data: SyntheticSet, schedule: NoiseSchedule) -> Denoiser:
    """Full-parameter Adam on the global loss only, standing in for a pretrained backbone."""
    theta = base.trainable()
    opt = Optimizer("adam", cfg.base_pretrain_lr)
    for step in range(cfg.base_pretrain_steps):
        batch = sample_batch(data, schedule, np.random.default_rng([cfg.seed, 8, step]), cfg.batch_size)
        x = make_inputs(base.cfg, batch.zt, batch.t, batch.cond)
        target = batch.eps.reshape(batch.eps.shape[0], -1)
        model = base

        def loss(v):
            return ad.sq_err(model.graph(v, x), target)

        value, grad = value_and_grad(loss, theta)
        if not math.isfinite(value):
            raise TrainingAborted(step, 0, "non-finite loss while pretraining the base")
        theta = opt.step(theta, grad)
    return base.with_trainable(theta)


def build_model(cfg: RunConfig, train: SyntheticSet, schedule: NoiseSchedule) -> AdaptedDenoiser:
    base = Denoiser.create(denoiser_config(cfg), derived_seed(cfg.seed, 5))
    if cfg.base_pretrain_steps:
        base = pretrain_base(base, cfg, train, schedule)
    spec = AdapterSpec(cfg.adapter.rank, cfg.adapter.beta, tuple(cfg.adapter.targets))
    model, _, _ = attach_adapter(base, spec, derived_seed(cfg.seed, 6))
    return model


def evaluation_timesteps(T: int) -> list[int]:
    return [max(1, T // 4), max(1, T // 2), max(1, (3 * T) // 4)]


def evaluate(model, eval_set: SyntheticSet, schedule: NoiseSchedule, seed: int = 0,
             normalization: str = "full", batch_size: int | None = None) -> dict[str, float]:
    """Mean region losses over the eval set at timesteps T/4, T/2, 3T/4.

    Noise for sample i at the j-th timestep comes from its own seed, and the
    per-sample losses are summed with ``math.fsum``, so chunking the set into
    batches of any size gives identical results.
    """
    n = len(eval_set)
    if n == 0:
        raise ValueError("evaluation set is empty")
    step = n if batch_size is None else batch_size
    if step < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    per = {"l_global": [], "l_face": [], "l_hand": []}
    for j, t in enumerate(evaluation_timesteps(schedule.T)):
        for lo in range(0, n, step):
            idx = np.arange(lo, min(n, lo + step))
            z0 = eval_set.z0[idx]
            eps = np.stack([np.random.default_rng([seed, 3, int(i), j]).standard_normal(z0.shape[1:]) for i in idx])
            batch = make_batch(z0, eps, np.full(idx.size, t), schedule, eval_set.face[idx], eval_set.hand[idx],
                               eval_set.cond[idx])
            pred = model.predict(make_inputs(model.cfg, batch.zt, batch.t, batch.cond)).reshape(eps.shape)
            d2 = ((eps - pred) ** 2).reshape(idx.size, -1)
            D = d2.shape[1]
            per["l_global"].extend((d2.sum(axis=1) / D).tolist())
            for key, mask in (("l_face", batch.face), ("l_hand", batch.hand)):
                m = np.broadcast_to(mask[:, None], eps.shape).reshape(idx.size, -1)
                num = ((m * m) * d2).sum(axis=1)
                den = np.full(idx.size, float(D)) if normalization == "full" else np.maximum((m * m).sum(axis=1), 1.0)
                per[key].extend((num / den).tolist())
    return {k: math.fsum(v) / len(v) for k, v in per.items()}


def evaluate_checkpoint(cfg: RunConfig, checkpoint: str | Path) -> dict[str, float]:
    """Rebuild the frozen base from ``cfg``, attach a saved adapter and evaluate it."""
    schedule = schedule_of(cfg)
    train, eval_set = datasets(cfg)
    model = build_model(cfg, train, schedule)
    adapter = load_adapter(checkpoint)
    if adapter.spec != model.adapter.spec:
        raise AdapterError(f"checkpoint adapter {adapter.spec} does not match config adapter {model.adapter.spec}")
    for layer in adapter.spec.targets:
        if adapter.A[layer].shape != model.adapter.A[layer].shape or adapter.B[layer].shape != model.adapter.B[layer].shape:
            raise AdapterError(f"checkpoint shapes for {layer} do not match the configured network")
    return evaluate(AdaptedDenoiser(model.base, adapter), eval_set, schedule, cfg.seed, cfg.normalization)


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise RunIOError(path, exc) from exc


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_run(record: RunRecord, out_dir: Path) -> None:
    _write(out_dir / "config.json", dump_config(record.config) + "\n")
    _write(out_dir / "metrics.csv", _csv_text(METRICS_HEADER, [m.row() for m in record.metrics]))
    eval_rows = [[str(m.step)] + [repr(m.eval[k]) for k in ("l_global", "l_face", "l_hand")]
                 for m in record.metrics if m.eval is not None]
    _write(out_dir / "eval.csv", _csv_text(EVAL_HEADER, eval_rows))
    grams = "".join(json.dumps({"step": m.step, "strategy": record.config.strategy, "gram": m.gram,
                                "w": [m.w1, m.w2, m.w3], "floor_applied": m.floor_applied}) + "\n"
                    for m in record.metrics)
    _write(out_dir / "grams.jsonl", grams)
    try:
        save_adapter(out_dir / "adapter", record.adapter)
    except OSError as exc:
        raise RunIOError(out_dir / "adapter", exc) from exc
    record.checkpoint = str(out_dir / "adapter")
    _write(out_dir / "run.json", json.dumps(record.summary(), indent=2) + "\n")


def run_training(cfg: RunConfig, write: bool = True) -> RunRecord:
    started = time.perf_counter()
    schedule = schedule_of(cfg)
    train, eval_set = datasets(cfg)
    model = build_model(cfg, train, schedule)
    strategy = WeightStrategy(
        cfg.strategy, seed=cfg.seed, solver=solver_of(cfg),
        ls_weights=cfg.strategy_options.ls_weights, uw_lr=cfg.strategy_options.uw_lr,
    )
    solver = solver_of(cfg)
    probe = fixed_batch(train, schedule, cfg.seed, cfg.eval_count)
    probe_initial = region_losses(model, probe, cfg.normalization).tolist()

    theta = model.trainable()
    opt = Optimizer(cfg.optimizer, cfg.lr)
    metrics: list[MetricsRecord] = []
    clamp_steps = 0
    for step in range(cfg.steps):
        batch = sample_batch(train, schedule, np.random.default_rng([cfg.seed, 2, step]), cfg.batch_size)
        current = model.with_trainable(theta)
        try:
            bundle = objective_bundle(batch, current, theta, cfg.normalization)
        except ObjectiveError as exc:
            raise TrainingAborted(step, exc.index, str(exc)) from exc
        weights = strategy(bundle)
        clamp_steps += int(weights.floor_applied)
        d = aggregate_direction(bundle, weights)
        if step % cfg.eval_every == 0 or step == cfg.steps - 1:
            K = strategy.last_gram if strategy.last_gram is not None else gram(bundle)
            try:
                cf = mpd_weights_closed(K, solver).residual
            except ArithmeticError:
                cf = math.nan
            w = np.zeros(3)
            w[: weights.w.size] = weights.w[:3]
            gn = np.sqrt(np.diag(K))
            metrics.append(MetricsRecord(
                step, *bundle.losses.tolist(), *w.tolist(), *gn.tolist(),
                pareto_stationarity(bundle), cf, K.tolist(), weights.floor_applied,
                evaluate(current, eval_set, schedule, cfg.seed, cfg.normalization),
            ))
            log.info("step %d losses %s w %s", step, bundle.losses, weights.w)
        theta = opt.step(theta, d)
        if not np.all(np.isfinite(theta.data)):
            raise TrainingAborted(step, None, "parameters became non-finite")

    final = model.with_trainable(theta)
    record = RunRecord(
        config=cfg,
        metrics=metrics,
        final_eval=evaluate(final, eval_set, schedule, cfg.seed, cfg.normalization),
        probe_initial=probe_initial,
        probe_final=region_losses(final, probe, cfg.normalization).tolist(),
        clamp_steps=clamp_steps,
        steps=cfg.steps,
        adapter=final.adapter,
    )
    record.duration_s = time.perf_counter() - started
    if write:
        out = cfg.resolved_out_dir()
        record.out_dir = str(out)
        write_run(record, out)
    return record
