"""Central finite differences, used as the independent gradient oracle."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import ParamVector


class FiniteDiffError(ArithmeticError):
    def __init__(self, coordinate: int, value: float):
        super().__init__(f"non-finite function value {value} when perturbing coordinate {coordinate}")
        self.coordinate = coordinate


def finite_diff(f: Callable, theta, h: float = 1e-5):
    """``(f(θ + h e_j) - f(θ - h e_j)) / 2h`` for every coordinate j.

    ``f`` is called with an object of the same type as ``theta`` (a
    :class:`ParamVector` or an array) and must return a float.
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    is_pv = isinstance(theta, ParamVector)
    base = theta.data if is_pv else np.asarray(theta, dtype=np.float64)
    shape = base.shape
    flat = base.reshape(-1).copy()

    def call(v):
        arg = theta.with_data(v) if is_pv else v.reshape(shape)
        return float(f(arg))

    grad = np.empty_like(flat)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + h
        fp = call(flat.copy())
        flat[j] = orig - h
        fm = call(flat.copy())
        flat[j] = orig
        for val in (fp, fm):
            if not np.isfinite(val):
                raise FiniteDiffError(j, val)
        grad[j] = (fp - fm) / (2.0 * h)
    return theta.with_data(grad) if is_pv else grad.reshape(shape)


def max_rel_error(analytic, numeric, floor: float = 1e-8) -> float:
    """Largest elementwise ``|a - n| / max(|a|, floor)``."""
    a = analytic.data if isinstance(analytic, ParamVector) else np.asarray(analytic)
    n = numeric.data if isinstance(numeric, ParamVector) else np.asarray(numeric)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / np.maximum(np.abs(a), floor)))


def finite_diff_stacked(f_stack: Callable[[np.ndarray], np.ndarray], theta, h: float = 1e-5,
                        chunk: int = 64, dtype=np.longdouble) -> np.ndarray:
    """Central differences with many perturbations evaluated per call.

    ``f_stack`` maps a (P, n) matrix of parameter vectors (in ``dtype``) to a
    (P, m) matrix of function values. Returns the (m, n) Jacobian estimate in
    float64. Evaluating in extended precision keeps the difference quotient's
    roundoff (~eps·|f|/h) far below the tolerances the checks use.
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    base = (theta.data if isinstance(theta, ParamVector) else np.asarray(theta, dtype=np.float64).reshape(-1))
    base = base.astype(dtype)
    n = base.size
    step = dtype(h)
    cols = []
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        rows = np.arange(idx.size)
        plus = np.tile(base, (idx.size, 1))
        minus = plus.copy()
        plus[rows, idx] += step
        minus[rows, idx] -= step
        fp = np.asarray(f_stack(plus)).reshape(idx.size, -1)
        fm = np.asarray(f_stack(minus)).reshape(idx.size, -1)
        for vals in (fp, fm):
            bad = np.flatnonzero(~np.isfinite(vals).all(axis=1))
            if bad.size:
                row = vals[bad[0]]
                raise FiniteDiffError(int(idx[bad[0]]), float(row[~np.isfinite(row)][0]))
        cols.append(((fp - fm) / (2 * step)).T)
    if not cols:
        return np.zeros((0, 0))
    return np.concatenate(cols, axis=1).astype(np.float64)
