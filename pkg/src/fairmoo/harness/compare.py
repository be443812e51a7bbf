from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .config import RunConfig
from .training import run_training

STRATEGY_FIELDS = {"strategy", "strategy_options", "out_dir", "seed"}


class ComparisonError(ValueError):
    pass


@dataclass
class StrategyRow:
    label: str
    per_seed: dict[int, dict[str, float]]

    def median(self, key: str) -> float:
        return statistics.median(v[key] for v in self.per_seed.values())

    def as_dict(self) -> dict:
        keys = ("l_global", "l_face", "l_hand", "regional")
        return {
            "strategy": self.label,
            **{f"median_{k}": self.median(k) for k in keys},
            "per_seed": {str(s): v for s, v in self.per_seed.items()},
        }


@dataclass
class ComparisonTable:
    rows: list[StrategyRow]
    seeds: list[int]
    # wins[a][b]: seeds on which row a had strictly lower face+hand eval MSE than row b
    wins: list[list[int]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"seeds": self.seeds, "rows": [r.as_dict() for r in self.rows], "wins": self.wins}

    def format(self) -> str:
        lines = [f"{'strategy':<14}{'global':>12}{'face':>12}{'hand':>12}{'face+hand':>12}"]
        for r in self.rows:
            lines.append(
                f"{r.label:<14}{r.median('l_global'):>12.6f}{r.median('l_face'):>12.6f}"
                f"{r.median('l_hand'):>12.6f}{r.median('regional'):>12.6f}"
            )
        return "\n".join(lines)


def strategy_label(cfg: RunConfig) -> str:
    w = cfg.strategy_options.ls_weights
    if cfg.strategy == "ls" and w is not None:
        return "ls[" + ",".join(f"{x:g}" for x in w) + "]"
    return cfg.strategy


def _check_matched(cfgs: Sequence[RunConfig]) -> None:
    ref = cfgs[0].model_dump(exclude=STRATEGY_FIELDS)
    for cfg in cfgs[1:]:
        other = cfg.model_dump(exclude=STRATEGY_FIELDS)
        diff = sorted(k for k in ref if ref[k] != other[k])
        if diff:
            raise ComparisonError(f"configs differ in non-strategy fields: {diff}")


def compare_strategies(cfgs: Sequence[RunConfig], seeds: Sequence[int] | None = None,
                       out_root: str | Path | None = None) -> ComparisonTable:
    """Train every config on every seed and tabulate final eval metrics per strategy."""
    if not cfgs:
        raise ComparisonError("no configs given")
    _check_matched(cfgs)
    seeds = list(seeds) if seeds is not None else [cfgs[0].seed]
    rows = []
    for i, cfg in enumerate(cfgs):
        label = strategy_label(cfg)
        per_seed = {}
        for seed in seeds:
            changes = {"seed": seed}
            if out_root is not None:
                changes["out_dir"] = str(Path(out_root) / f"{i}_{label}" / f"seed{seed}")
            record = run_training(cfg.replace(**changes), write=out_root is not None)
            ev = dict(record.final_eval)
            ev["regional"] = ev["l_face"] + ev["l_hand"]
            per_seed[seed] = ev
        rows.append(StrategyRow(label, per_seed))
    wins = [
        [sum(a.per_seed[s]["regional"] < b.per_seed[s]["regional"] for s in seeds) for b in rows]
        for a in rows
    ]
    return ComparisonTable(rows, seeds, wins)
