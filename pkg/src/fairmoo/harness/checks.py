"""Self-checks exposed through the CLI and service: gradient oracle runs and dataset export."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..adapters import AdapterSpec, attach_adapter
from ..diffusion_toy import (
    Denoiser,
    DenoiserConfig,
    fd_region_gradients,
    make_batch,
    make_schedule,
    objective_bundle,
    synth_dataset,
)
from ..numerics import max_rel_error, save_tensor

OBJECTIVES = ("l_global", "l_face", "l_hand")


def random_gradcheck_case(rng: np.random.Generator, image_size: int = 8, max_width: int = 64,
                          batch_size: int = 2, adapter: bool | None = None) -> dict:
    """One random tiny denoiser (optionally adapted) checked against central differences.

    Widths are drawn log-uniformly in [4, max_width]; adapted cases perturb the
    adapter factors so the B·A path carries non-zero gradient everywhere.
    """
    widths = tuple(int(round(math.exp(rng.uniform(math.log(4), math.log(max_width))))) for _ in range(2))
    cfg = DenoiserConfig((1, image_size, image_size), widths)
    base = Denoiser.create(cfg, int(rng.integers(1 << 31)))
    data = synth_dataset(batch_size, int(rng.integers(1 << 31)), image_size)
    schedule = make_schedule(100, 1e-4, 0.02)
    eps = rng.standard_normal(data.z0.shape)
    t = rng.integers(1, schedule.T + 1, batch_size)
    batch = make_batch(data.z0, eps, t, schedule, data.face, data.hand, data.cond)
    use_adapter = bool(rng.integers(0, 2)) if adapter is None else adapter
    rank = 0
    if use_adapter:
        rank = int(rng.integers(1, min(4, *widths) + 1))
        model, _, _ = attach_adapter(base, AdapterSpec(rank=rank, beta=0.4), int(rng.integers(1 << 31)))
        theta = model.trainable()
        model = model.with_trainable(theta.with_data(0.3 * rng.standard_normal(theta.size)))
    else:
        model = base
    theta = model.trainable()
    bundle = objective_bundle(batch, model, theta)
    numeric = fd_region_gradients(model, batch, theta, h=1e-5)
    errors = {name: max_rel_error(bundle.grads[i], numeric[i]) for i, name in enumerate(OBJECTIVES)}
    return {"widths": list(widths), "adapter_rank": rank, "params": theta.size, "max_rel_error": errors}


def gradcheck(seed: int, count: int = 1, tol: float = 1e-5) -> dict:
    rng = np.random.default_rng([seed, 11])
    cases = [random_gradcheck_case(rng) for _ in range(count)]
    worst = max((max(c["max_rel_error"].values()) for c in cases), default=0.0)
    return {"seed": seed, "tolerance": tol, "worst": worst, "passed": worst <= tol, "cases": cases}


def export_synth(count: int, seed: int, out_dir: str | Path, image_size: int = 32,
                 latent_factor: int = 1, eval_count: int | None = None) -> dict:
    """Write ``train`` and ``eval`` latents as tensor dumps plus per-sample boxes in masks.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    splits = {"train": (0, count), "eval": (1, count if eval_count is None else eval_count)}
    listing = {}
    for name, (split, n) in splits.items():
        data = synth_dataset(n, seed, image_size, latent_factor, split=split)
        save_tensor(out, name, data.z0)
        listing[name] = [
            {"index": i, "face_box": list(s.face_box), "hand_box": list(s.hand_box)} for i, s in enumerate(data.specs)
        ]
    meta = {"seed": seed, "image_size": image_size, "latent_factor": latent_factor, "splits": listing}
    (out / "masks.json").write_text(json.dumps(meta, indent=2) + "\n")
    return {"out_dir": str(out), "counts": {k: len(v) for k, v in listing.items()}}
