"""Request and response models for the HTTP service."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..harness import RunConfig


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GramRequest(_Model):
    k: int = Field(ge=1, le=16)
    entries: list[list[float]]
    oracle: bool = False
    eps_reg: float = Field(1e-10, ge=0)
    w_floor: float = Field(1e-8, gt=0)

    @model_validator(mode="after")
    def _square(self):
        if len(self.entries) != self.k or any(len(row) != self.k for row in self.entries):
            raise ValueError(f"entries must be a {self.k}x{self.k} matrix")
        return self


class WeightsResponse(_Model):
    w: list[float]
    residual: float
    floor_applied: bool


class TrainRequest(_Model):
    config: RunConfig
    write: bool = True


class RunSummary(_Model):
    final_eval: dict[str, float]
    probe_initial: list[float]
    probe_final: list[float]
    clamp_steps: int
    steps: int
    out_dir: str | None
    checkpoint: str | None
    duration_s: float
    metrics_logged: int


class EvalRequest(_Model):
    config: RunConfig
    checkpoint: str


class RegionMetrics(_Model):
    l_global: float
    l_face: float
    l_hand: float


class CompareRequest(_Model):
    configs: list[RunConfig] = Field(min_length=1)
    seeds: list[int] | None = None
    out_root: str | None = None


class CompareResponse(_Model):
    seeds: list[int]
    rows: list[dict]
    wins: list[list[int]]
    table: str


class SynthRequest(_Model):
    count: int = Field(ge=0)
    seed: int = Field(ge=0)
    out_dir: str
    image_size: int = Field(32, ge=8, le=128)
    latent_factor: int = Field(1, ge=1)
    eval_count: int | None = Field(None, ge=0)


class SynthResponse(_Model):
    out_dir: str
    counts: dict[str, int]


class GradcheckRequest(_Model):
    seed: int = Field(0, ge=0)
    count: int = Field(1, ge=1, le=1000)
    tol: float = Field(1e-5, gt=0)


class GradcheckResponse(_Model):
    seed: int
    tolerance: float
    worst: float
    passed: bool
    cases: list[dict]


class JobStatus(_Model):
    id: str
    state: Literal["queued", "running", "done", "failed"]
    result: RunSummary | None = None
    error: str | None = None
