"""Minimal reverse-mode array engine.

Everything is float64. Each operation validates shapes, checks its output
for NaN/Inf, and (while the tape is recording) registers a backward
closure. ``Tape.backward`` walks the recorded nodes once, in reverse
order, and accumulates gradients into every named parameter leaf.

The engine is deliberately small: only the operations the model needs,
no fusion, no views. Arrays are immutable by convention -- ops never
write into their inputs.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class NumericsError(Exception):
    """Shape mismatch, non-finite value, or misuse of the tape."""


def _f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _check_finite(value: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(value)):
        raise NumericsError(f"non-finite output of {op}")


class Var:
    """One node of the graph: a float64 array plus a gradient slot."""

    __slots__ = ("value", "grad", "tape", "_parents", "_backward", "name")

    def __init__(self, value: np.ndarray, tape: "Tape", name: str | None = None):
        self.value = value
        self.grad: np.ndarray | None = None
        self.tape = tape
        self._parents: tuple = ()
        self._backward: Callable | None = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    # operator sugar; scalars are lifted to constants
    def __add__(self, other):
        return add(self, _lift(other, self.tape))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other, self.tape))

    def __rsub__(self, other):
        return sub(_lift(other, self.tape), self)

    def __mul__(self, other):
        return mul(self, _lift(other, self.tape))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, name={self.name!r})"


class Tape:
    """Ordered record of operations for one forward pass.

    Construction order is execution order, which is a topological order of
    the graph, so ``backward`` can just walk ``nodes`` reversed.
    """

    def __init__(self, recording: bool = True):
        self.recording = recording
        self.nodes: list[Var] = []
        self.params: dict[str, Var] = {}

    def param(self, name: str, value: np.ndarray) -> Var:
        if name in self.params:
            return self.params[name]
        v = Var(_f64(value), self, name=name)
        self.params[name] = v
        return v

    def const(self, value) -> Var:
        return Var(_f64(value), self)

    def backward(self, loss: Var) -> dict[str, np.ndarray]:
        """Gradient of a scalar loss w.r.t. every registered parameter.

        Parameters the loss never touched get zero gradients.
        """
        if not self.recording:
            raise NumericsError("backward on a non-recording tape")
        if loss.value.size != 1:
            raise NumericsError(
                f"backward needs a scalar loss, got shape {loss.value.shape}"
            )
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self.nodes):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)
        return {
            name: (p.grad if p.grad is not None else np.zeros_like(p.value))
            for name, p in self.params.items()
        }


def _lift(x, tape: Tape) -> Var:
    if isinstance(x, Var):
        return x
    return tape.const(x)


def _record(tape: Tape, value: np.ndarray, parents: tuple, backward, op: str) -> Var:
    _check_finite(value, op)
    out = Var(value, tape)
    if tape.recording:
        out._parents = parents
        out._backward = backward
        tape.nodes.append(out)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise and linear ops
# ---------------------------------------------------------------------------

def add(a: Var, b: Var) -> Var:
    value = a.value + b.value

    def backward(g):
        a.accum(_unbroadcast(g, a.value.shape))
        b.accum(_unbroadcast(g, b.value.shape))

    return _record(a.tape, value, (a, b), backward, "add")


def sub(a: Var, b: Var) -> Var:
    value = a.value - b.value

    def backward(g):
        a.accum(_unbroadcast(g, a.value.shape))
        b.accum(-_unbroadcast(g, b.value.shape))

    return _record(a.tape, value, (a, b), backward, "sub")


def mul(a: Var, b: Var) -> Var:
    value = a.value * b.value

    def backward(g):
        a.accum(_unbroadcast(g * b.value, a.value.shape))
        b.accum(_unbroadcast(g * a.value, b.value.shape))

    return _record(a.tape, value, (a, b), backward, "mul")


def scale(a: Var, c: float) -> Var:
    value = a.value * c

    def backward(g):
        a.accum(g * c)

    return _record(a.tape, value, (a,), backward, "scale")


def add_const(a: Var, c: float) -> Var:
    value = a.value + c

    def backward(g):
        a.accum(g)

    return _record(a.tape, value, (a,), backward, "add_const")


def matmul(a: Var, b: Var) -> Var:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise NumericsError(
            f"matmul shape mismatch: {a.value.shape} @ {b.value.shape}"
        )
    value = a.value @ b.value

    def backward(g):
        a.accum(g @ b.value.T)
        b.accum(a.value.T @ g)

    return _record(a.tape, value, (a, b), backward, "matmul")


def sigmoid(a: Var) -> Var:
    # piecewise form avoids overflow in exp for large |x|
    x = a.value
    value = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                     np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(g):
        a.accum(g * value * (1.0 - value))

    return _record(a.tape, value, (a,), backward, "sigmoid")


def tanh(a: Var) -> Var:
    value = np.tanh(a.value)

    def backward(g):
        a.accum(g * (1.0 - value * value))

    return _record(a.tape, value, (a,), backward, "tanh")


def relu(a: Var) -> Var:
    value = np.maximum(a.value, 0.0)

    def backward(g):
        a.accum(g * (a.value > 0.0))

    return _record(a.tape, value, (a,), backward, "relu")


def log(a: Var) -> Var:
    if np.any(a.value <= 0.0):
        raise NumericsError("log of a non-positive value")
    value = np.log(a.value)

    def backward(g):
        a.accum(g / a.value)

    return _record(a.tape, value, (a,), backward, "log")


def clip(a: Var, lo: float, hi: float) -> Var:
    """Clamp values; gradient passes through wherever not clipped."""
    value = np.clip(a.value, lo, hi)
    inside = (a.value > lo) & (a.value < hi)

    def backward(g):
        a.accum(g * inside)

    return _record(a.tape, value, (a,), backward, "clip")


# ---------------------------------------------------------------------------
# reductions, pooling, softmax
# ---------------------------------------------------------------------------

def sum_all(a: Var) -> Var:
    value = np.asarray(a.value.sum())

    def backward(g):
        a.accum(np.broadcast_to(g, a.value.shape))

    return _record(a.tape, value, (a,), backward, "sum_all")


def mean_all(a: Var) -> Var:
    n = a.value.size
    value = np.asarray(a.value.sum() / n)

    def backward(g):
        a.accum(np.broadcast_to(g / n, a.value.shape))

    return _record(a.tape, value, (a,), backward, "mean_all")


def sum_axis(a: Var, axis: int, keepdims: bool = False) -> Var:
    value = a.value.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        gg = g if keepdims else np.expand_dims(g, axis)
        a.accum(np.broadcast_to(gg, a.value.shape))

    return _record(a.tape, value, (a,), backward, "sum_axis")


def mean_axis(a: Var, axis: int, keepdims: bool = False) -> Var:
    n = a.value.shape[axis]
    value = a.value.mean(axis=axis, keepdims=keepdims)

    def backward(g):
        gg = g if keepdims else np.expand_dims(g, axis)
        a.accum(np.broadcast_to(gg / n, a.value.shape))

    return _record(a.tape, value, (a,), backward, "mean_axis")


def max_axis(a: Var, axis: int) -> Var:
    """Max over one axis; the argmax found in the forward pass routes the
    gradient (first hit wins on exact ties)."""
    value = a.value.max(axis=axis)
    arg = np.expand_dims(a.value.argmax(axis=axis), axis)

    def backward(g):
        ga = np.zeros_like(a.value)
        np.put_along_axis(ga, arg, np.expand_dims(g, axis), axis)
        a.accum(ga)

    return _record(a.tape, value, (a,), backward, "max_axis")


def softmax(a: Var, axis: int) -> Var:
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    value = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * value).sum(axis=axis, keepdims=True)
        a.accum(value * (g - dot))

    return _record(a.tape, value, (a,), backward, "softmax")


# ---------------------------------------------------------------------------
# shape plumbing
# ---------------------------------------------------------------------------

def reshape(a: Var, shape: Sequence[int]) -> Var:
    value = a.value.reshape(shape)
    old = a.value.shape

    def backward(g):
        a.accum(g.reshape(old))

    return _record(a.tape, value, (a,), backward, "reshape")


def transpose(a: Var) -> Var:
    value = a.value.T

    def backward(g):
        a.accum(g.T)

    return _record(a.tape, value, (a,), backward, "transpose")


def concat(parts: Sequence[Var], axis: int = 0) -> Var:
    value = np.concatenate([p.value for p in parts], axis=axis)
    sizes = [p.value.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)
    tape = parts[0].tape

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            p.accum(g[tuple(idx)])

    return _record(tape, value, tuple(parts), backward, "concat")


def slice_cols(a: Var, start: int, stop: int) -> Var:
    value = a.value[:, start:stop]

    def backward(g):
        ga = np.zeros_like(a.value)
        ga[:, start:stop] = g
        a.accum(ga)

    return _record(a.tape, value, (a,), backward, "slice_cols")


def gather_rows(a: Var, idx: np.ndarray) -> Var:
    idx = np.asarray(idx, dtype=np.int64)
    value = a.value[idx]

    def backward(g):
        ga = np.zeros_like(a.value)
        np.add.at(ga, idx, g)
        a.accum(ga)

    return _record(a.tape, value, (a,), backward, "gather_rows")


def scatter_update(base: Var, idx: np.ndarray, values: Var) -> Var:
    """Copy of ``base`` with rows/entries at ``idx`` replaced by ``values``.

    Untouched entries are byte-identical to ``base``; their gradient flows
    to ``base``, the replaced entries' gradient flows to ``values``.
    """
    idx = np.asarray(idx, dtype=np.int64)
    if len(idx) != len(np.unique(idx)):
        raise NumericsError("scatter_update requires unique indices")
    value = base.value.copy()
    value[idx] = values.value

    def backward(g):
        gb = np.array(g, copy=True)
        gb[idx] = 0.0
        base.accum(gb)
        values.accum(g[idx])

    return _record(base.tape, value, (base, values), backward, "scatter_update")


def repeat_rows(a: Var, times: int) -> Var:
    """Each row repeated ``times`` times consecutively (aaabbbccc)."""
    value = np.repeat(a.value, times, axis=0)
    n = a.value.shape[0]

    def backward(g):
        a.accum(g.reshape(n, times, *a.value.shape[1:]).sum(axis=1))

    return _record(a.tape, value, (a,), backward, "repeat_rows")


def tile_rows(a: Var, times: int) -> Var:
    """The whole block repeated ``times`` times (abcabcabc)."""
    reps = (times,) + (1,) * (a.value.ndim - 1)
    value = np.tile(a.value, reps)
    n = a.value.shape[0]

    def backward(g):
        a.accum(g.reshape(times, n, *a.value.shape[1:]).sum(axis=0))

    return _record(a.tape, value, (a,), backward, "tile_rows")


# ---------------------------------------------------------------------------
# regularization / normalization
# ---------------------------------------------------------------------------

def dropout(a: Var, rate: float, rng: np.random.Generator) -> Var:
    """Inverted dropout: surviving entries scaled by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise NumericsError(f"dropout rate {rate} outside [0, 1)")
    if rate == 0.0:
        return a
    keep = (rng.random(a.value.shape) >= rate) / (1.0 - rate)
    value = a.value * keep

    def backward(g):
        a.accum(g * keep)

    return _record(a.tape, value, (a,), backward, "dropout")


def layer_norm(a: Var, gain: Var, bias: Var, eps: float = 1e-5) -> Var:
    """Row-wise layer normalization over the last axis."""
    mu = a.value.mean(axis=-1, keepdims=True)
    var = a.value.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.value - mu) * inv
    value = xhat * gain.value + bias.value

    def backward(g):
        dxhat = g * gain.value
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        a.accum(inv * (dxhat - m1 - xhat * m2))
        gain.accum(_unbroadcast(g * xhat, gain.value.shape))
        bias.accum(_unbroadcast(g, bias.value.shape))

    return _record(a.tape, value, (a, gain, bias), backward, "layer_norm")


# ---------------------------------------------------------------------------
# verification harness
# ---------------------------------------------------------------------------

def finite_difference_check(
    f: Callable[[dict[str, np.ndarray], Tape], Var],
    params: dict[str, np.ndarray],
    h: float = 1e-3,
    min_coords: int = 64,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare reverse-mode gradients against central differences.

    ``f(params, tape)`` must build and return a scalar loss Var and be
    deterministic (no dropout). A random subset of at least ``min_coords``
    coordinates (all of them if there are fewer) is probed; returns the
    max relative error with denominator max(|analytic|, |numeric|, 1e-8).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    tape = Tape()
    loss = f(params, tape)
    grads = tape.backward(loss)

    coords: list[tuple[str, int]] = []
    for name in sorted(params):
        coords.extend((name, i) for i in range(params[name].size))
    if len(coords) > min_coords:
        chosen = rng.choice(len(coords), size=min_coords, replace=False)
        coords = [coords[i] for i in chosen]

    def eval_at(perturbed: dict[str, np.ndarray]) -> float:
        return float(f(perturbed, Tape(recording=False)).value)

    worst = 0.0
    for name, flat in coords:
        bumped = dict(params)
        plus = params[name].copy()
        plus.flat[flat] += h
        bumped[name] = plus
        f_plus = eval_at(bumped)
        minus = params[name].copy()
        minus.flat[flat] -= h
        bumped[name] = minus
        f_minus = eval_at(bumped)
        numeric = (f_plus - f_minus) / (2.0 * h)
        grad = grads.get(name)  # params f never touched have zero gradient
        analytic = grad.flat[flat] if grad is not None else 0.0
        denom = max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst
