"""Tape-based reverse-mode differentiation over a fixed operator vocabulary.

Every operator carries a hand-written adjoint. Anything outside the vocabulary
(division, powers, numpy ufuncs applied to a :class:`Var`, ...) raises
:class:`UnsupportedOperation` while the graph is being built.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .tensor import ParamVector, as_tensor


class UnsupportedOperation(TypeError):
    pass


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# Each entry: (forward(*values, **attrs) -> value, adjoint(g, out, *values, **attrs) -> grads per input)

def _affine_fwd(x, W, b):
    return x @ W.T + b


def _affine_adj(g, out, x, W, b):
    return g @ W, g.T @ x, g.sum(axis=0)


def _lowrank_fwd(x, W, b, A, B, *, beta):
    return x @ (W + beta * (B @ A)).T + b


def _lowrank_adj(g, out, x, W, b, A, B, *, beta):
    W_eff = W + beta * (B @ A)
    gW = g.T @ x
    return g @ W_eff, gW, g.sum(axis=0), beta * (B.T @ gW), beta * (gW @ A.T)


def _masked_sq_fwd(a, b, mask, *, denom):
    d = a - b
    return np.asarray(np.sum((mask * mask) * (d * d)) / denom)


def _masked_sq_adj(g, out, a, b, mask, *, denom):
    ga = (2.0 * g / denom) * np.broadcast_to(mask * mask, a.shape) * (a - b)
    return ga, -ga, None


def _sq_fwd(a, b):
    d = a - b
    return np.asarray(np.sum(d * d) / d.size)


def _sq_adj(g, out, a, b):
    ga = (2.0 * g / a.size) * (a - b)
    return ga, -ga


OPS: dict[str, tuple[Callable, Callable]] = {
    "affine": (_affine_fwd, _affine_adj),
    "lowrank_affine": (_lowrank_fwd, _lowrank_adj),
    "tanh": (np.tanh, lambda g, out, x: (g * (1.0 - out * out),)),
    "relu": (lambda x: np.maximum(x, 0.0), lambda g, out, x: (g * (x > 0),)),
    "add": (np.add, lambda g, out, a, b: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))),
    "sub": (np.subtract, lambda g, out, a, b: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))),
    "mul": (
        np.multiply,
        lambda g, out, a, b: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
    ),
    "sum": (lambda x: np.asarray(np.sum(x)), lambda g, out, x: (np.full(x.shape, g),)),
    "mean": (lambda x: np.asarray(np.sum(x) / x.size), lambda g, out, x: (np.full(x.shape, g / x.size),)),
    "sq_err": (_sq_fwd, _sq_adj),
    "masked_sq_err": (_masked_sq_fwd, _masked_sq_adj),
}


@dataclass
class Node:
    op: str | None  # None for leaves
    inputs: tuple[int, ...]
    value: np.ndarray
    requires_grad: bool
    attrs: dict = field(default_factory=dict)
    name: str | None = None


class Var:
    """Handle to a node on a :class:`Tape`."""

    __slots__ = ("tape", "index")
    __array_ufunc__ = None  # keep numpy from silently consuming a Var

    def __init__(self, tape: Tape, index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def _unsupported(self, *args, **kwargs):
        raise UnsupportedOperation("operator is outside the differentiable vocabulary")

    __truediv__ = __rtruediv__ = __pow__ = __rpow__ = __matmul__ = __rmatmul__ = _unsupported
    __neg__ = __abs__ = __floordiv__ = __mod__ = _unsupported

    def __repr__(self) -> str:
        node = self.tape.nodes[self.index]
        return f"Var({node.op or 'leaf'}, shape={self.shape})"


class Tape:
    def __init__(self):
        self.nodes: list[Node] = []

    def _push(self, node: Node) -> Var:
        self.nodes.append(node)
        return Var(self, len(self.nodes) - 1)

    def param(self, value, name: str | None = None) -> Var:
        return self._push(Node(None, (), as_tensor(value), True, name=name))

    def const(self, value, name: str | None = None) -> Var:
        return self._push(Node(None, (), as_tensor(value), False, name=name))

    def _lift(self, x) -> int:
        if isinstance(x, Var):
            if x.tape is not self:
                raise ValueError("Var belongs to a different tape")
            return x.index
        if isinstance(x, (np.ndarray, float, int, np.floating)):
            return self.const(x).index
        raise UnsupportedOperation(f"cannot place {type(x).__name__} on the tape")

    def apply(self, op: str, *args, **attrs) -> Var:
        if op not in OPS:
            raise UnsupportedOperation(f"unknown operator {op!r}")
        idx = tuple(self._lift(a) for a in args)
        fwd, _ = OPS[op]
        value = np.asarray(fwd(*(self.nodes[i].value for i in idx), **attrs), dtype=np.float64)
        needs = any(self.nodes[i].requires_grad for i in idx)
        return self._push(Node(op, idx, value, needs, attrs))

    def replay(self) -> list[np.ndarray]:
        """Recompute every recorded value from the leaves, in recording order."""
        values: list[np.ndarray] = []
        for node in self.nodes:
            if node.op is None:
                values.append(node.value)
            else:
                fwd, _ = OPS[node.op]
                values.append(np.asarray(fwd(*(values[i] for i in node.inputs), **node.attrs), dtype=np.float64))
        return values

    def backward(self, out: Var, visit_log: list[int] | None = None) -> dict[int, np.ndarray]:
        """Adjoints of scalar ``out`` for every grad-requiring node that feeds it."""
        if out.value.size != 1:
            raise ValueError(f"backward needs a scalar output, got shape {out.shape}")
        grads: dict[int, np.ndarray] = {out.index: np.ones_like(out.value)}
        for i in range(out.index, -1, -1):
            g = grads.get(i)
            node = self.nodes[i]
            if g is None or node.op is None or not node.requires_grad:
                continue
            if visit_log is not None:
                visit_log.append(i)
            _, adj = OPS[node.op]
            ins = [self.nodes[j].value for j in node.inputs]
            for j, gj in zip(node.inputs, adj(g, node.value, *ins, **node.attrs)):
                if gj is None or not self.nodes[j].requires_grad:
                    continue
                grads[j] = grads[j] + gj if j in grads else gj
        return grads


def _tape_of(*args) -> Tape:
    for a in args:
        if isinstance(a, Var):
            return a.tape
    raise UnsupportedOperation("at least one operand must be a Var")


def affine(x, W, b) -> Var:
    return _tape_of(x, W, b).apply("affine", x, W, b)


def lowrank_affine(x, W, b, A, B, beta: float) -> Var:
    """``x @ (W + beta * B @ A).T + b`` as a single affine pass."""
    return _tape_of(x, W, b, A, B).apply("lowrank_affine", x, W, b, A, B, beta=float(beta))


def tanh(x: Var) -> Var:
    return _tape_of(x).apply("tanh", x)


def relu(x: Var) -> Var:
    return _tape_of(x).apply("relu", x)


def add(a, b) -> Var:
    return _tape_of(a, b).apply("add", a, b)


def sub(a, b) -> Var:
    return _tape_of(a, b).apply("sub", a, b)


def mul(a, b) -> Var:
    return _tape_of(a, b).apply("mul", a, b)


def sum_(x: Var) -> Var:
    return _tape_of(x).apply("sum", x)


def mean(x: Var) -> Var:
    return _tape_of(x).apply("mean", x)


def sq_err(a, b) -> Var:
    """Mean squared difference over all elements."""
    return _tape_of(a, b).apply("sq_err", a, b)


def masked_sq_err(a, b, mask: np.ndarray, denom: float) -> Var:
    """``sum((mask * (a - b))**2) / denom``; the mask is a constant broadcast against ``a``."""
    return _tape_of(a, b).apply("masked_sq_err", a, b, as_tensor(mask), denom=float(denom))


def _bind(tape: Tape, theta, constants: Mapping[str, np.ndarray] | None):
    if isinstance(theta, ParamVector):
        pv = theta
    else:
        pv = ParamVector.from_arrays({"theta": np.asarray(theta, dtype=np.float64)})
    vars_ = {name: tape.param(arr, name=name) for name, arr in pv.arrays().items()}
    for name, arr in (constants or {}).items():
        if name in vars_:
            raise ValueError(f"{name!r} is both trainable and constant")
        vars_[name] = tape.const(arr, name=name)
    return pv, vars_


def value_and_grad(f: Callable[[dict[str, Var]], Var], theta, constants=None):
    """Evaluate ``f`` on a fresh tape and return ``(value, gradient)``.

    ``f`` receives a dict of named :class:`Var` handles (one per segment of
    ``theta`` plus any ``constants``). The gradient has the same type and
    layout as ``theta``; constants receive no gradient.
    """
    tape = Tape()
    pv, vars_ = _bind(tape, theta, constants)
    out = f(vars_)
    if not isinstance(out, Var) or out.value.size != 1:
        raise ValueError("f must return a scalar Var")
    grads = tape.backward(out)
    flat = np.concatenate(
        [grads.get(vars_[s.name].index, np.zeros(s.shape)).reshape(-1) for s in pv.segments]
    ) if pv.segments else np.zeros(0)
    value = float(out.value.item())
    if isinstance(theta, ParamVector):
        return value, pv.with_data(flat)
    return value, flat.reshape(np.shape(theta))


def evaluate(f: Callable[[dict[str, Var]], Var], theta, constants=None) -> float:
    """Forward-only evaluation of the same kind of function ``value_and_grad`` takes."""
    tape = Tape()
    _, vars_ = _bind(tape, theta, constants)
    return float(f(vars_).value.item())
