from __future__ import annotations

import json
import os
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..diffusion_toy import LAYERS
from ..fair_moo import STRATEGIES
from .optim import OPTIMIZERS

OUT_ENV = "FAIRMOO_OUT"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScheduleConfig(_Strict):
    T: int = Field(1000, ge=1)
    beta_start: float = Field(1e-4, gt=0, lt=1)
    beta_end: float = Field(0.02, gt=0, lt=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.beta_start > self.beta_end:
            raise ValueError("beta_start must not exceed beta_end")
        return self


class AdapterConfig(_Strict):
    rank: int = Field(8, ge=1)
    beta: float = 0.4
    targets: tuple[str, ...] = LAYERS

    @model_validator(mode="after")
    def _known_layers(self):
        unknown = set(self.targets) - set(LAYERS)
        if unknown or not self.targets:
            raise ValueError(f"adapter targets must be a non-empty subset of {LAYERS}")
        return self


class StrategyOptions(_Strict):
    ls_weights: tuple[float, ...] | None = None
    uw_lr: float = Field(1e-2, gt=0)
    eps_reg: float = Field(1e-10, ge=0)
    w_floor: float = Field(1e-8, gt=0)


class RunConfig(_Strict):
    seed: int = Field(0, ge=0)
    image_size: int = Field(32, ge=8, le=128)
    latent_factor: int = Field(1, ge=1)
    schedule: ScheduleConfig = ScheduleConfig()
    widths: tuple[int, int] = (256, 256)
    adapter: AdapterConfig = AdapterConfig()
    base_pretrain_steps: int = Field(0, ge=0)
    base_pretrain_lr: float = Field(1e-3, gt=0)
    strategy: str = "mpd"
    strategy_options: StrategyOptions = StrategyOptions()
    lr: float = Field(1e-3, gt=0)
    optimizer: str = "sgd"
    steps: int = Field(2000, ge=0)
    batch_size: int = Field(16, ge=1)
    train_size: int = Field(1024, ge=1)
    eval_every: int = Field(100, ge=1)
    eval_count: int = Field(32, ge=1)
    normalization: str = "full"
    out_dir: str = "runs/default"

    @model_validator(mode="after")
    def _consistent(self):
        if self.image_size % self.latent_factor:
            raise ValueError(f"image_size {self.image_size} not divisible by latent_factor {self.latent_factor}")
        if self.image_size // self.latent_factor < 2:
            raise ValueError("latent grid must be at least 2x2")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.normalization not in ("full", "masked"):
            raise ValueError("normalization must be 'full' or 'masked'")
        if min(self.widths) < 1:
            raise ValueError("widths must be positive")
        if self.strategy_options.ls_weights is not None and len(self.strategy_options.ls_weights) != 3:
            raise ValueError("ls_weights needs exactly 3 entries")
        return self

    @property
    def latent_size(self) -> int:
        return self.image_size // self.latent_factor

    def resolved_out_dir(self) -> Path:
        return Path(os.environ.get(OUT_ENV) or self.out_dir)

    def replace(self, **changes) -> RunConfig:
        data = self.model_dump()
        data.update(changes)
        return RunConfig.model_validate(data)


def load_config(path: str | Path) -> RunConfig:
    return RunConfig.model_validate(json.loads(Path(path).read_text()))


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True)
