from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ObjectiveError(ArithmeticError):
    """A loss or gradient went non-finite; ``index`` names the objective (0-based)."""

    def __init__(self, index: int, message: str):
        super().__init__(f"objective {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class ObjectiveBundle:
    """Per-objective losses and their gradients; row i of ``grads`` is ∇l_i."""

    losses: np.ndarray
    grads: np.ndarray

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=np.float64).reshape(-1)
        grads = np.atleast_2d(np.asarray(self.grads, dtype=np.float64))
        if grads.shape[0] != losses.size:
            raise ValueError(f"{grads.shape[0]} gradient rows for {losses.size} losses")
        for i in range(losses.size):
            if not np.isfinite(losses[i]) or losses[i] < 0:
                raise ObjectiveError(i, f"loss {losses[i]} is not a finite non-negative number")
            if not np.all(np.isfinite(grads[i])):
                raise ObjectiveError(i, "gradient has non-finite entries")
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "grads", grads)

    @property
    def k(self) -> int:
        return self.losses.size

    @property
    def dim(self) -> int:
        return self.grads.shape[1]

    def permuted(self, order) -> ObjectiveBundle:
        order = list(order)
        return ObjectiveBundle(self.losses[order], self.grads[order])
