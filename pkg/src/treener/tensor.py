"""Minimal dense tensor with reverse-mode differentiation.

Every op builds a fresh node pointing at its inputs. Node ids come from a
global counter, so an op's inputs always carry smaller ids than its output
and sorting the reachable nodes by id yields a valid topological order.
Graphs are rebuilt for every sentence; nothing is cached between calls.

Only scalar broadcasting is supported. Row-vector additions and per-row
scaling have their own explicit ops (``add_rowvec``, ``scale_rows``).
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateRowError, NumericError, ShapeError

_node_ids = itertools.count()
_state = threading.local()

Backward = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    """A float64 array that optionally tracks gradients."""

    __slots__ = ("value", "grad", "requires_grad", "node_id", "name", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.array(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.value) if requires_grad else None
        self.node_id = next(_node_ids)
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Backward | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __len__(self) -> int:
        return self.value.shape[0]

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.value

    def item(self) -> float:
        return float(self.value)

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.value)

    def backward(self) -> None:
        backward(self)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(scale(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return index(self, key)


def constant(value) -> Tensor:
    return Tensor(value, requires_grad=False)


def parameter(value, name: str | None = None) -> Tensor:
    return Tensor(value, requires_grad=True, name=name)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@contextmanager
def no_grad():
    """Build detached nodes only (evaluation passes)."""
    prev = getattr(_state, "recording", True)
    _state.recording = False
    try:
        yield
    finally:
        _state.recording = prev


def record(value: np.ndarray, parents: Sequence[Tensor], backward_fn: Backward) -> Tensor:
    """Create the output node of an op.

    ``backward_fn`` maps the output gradient to one gradient (or None) per
    parent. If no parent requires gradients the node is left detached.
    """
    out = _new(Tensor)
    out.value = value
    out.node_id = next(_node_ids)
    out.name = None
    out.grad = None
    live = getattr(_state, "recording", True)
    if live:
        for p in parents:
            if p.requires_grad:
                break
        else:
            live = False
    if live:
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


_new = Tensor.__new__


def _check_same(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# --------------------------------------------------------------------------
# elementwise


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        if np.ndim(b) != 0:
            raise ShapeError("add: only scalar broadcasting is supported")
        s = float(b)
        return record(a.value + s, (a,), lambda g: (g,))
    _check_same(a, b, "add")
    return record(a.value + b.value, (a, b), lambda g: (g, g))


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return add(a, -float(b))
    _check_same(a, b, "sub")
    return record(a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        if np.ndim(b) != 0:
            raise ShapeError("mul: only scalar broadcasting is supported")
        return scale(a, float(b))
    _check_same(a, b, "mul")
    av, bv = a.value, b.value
    return record(av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return record(a.value * s, (a,), lambda g: (g * s,))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.value)
    return record(y, (a,), lambda g: (g * (1.0 - y * y),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows and gives exactly 0.5 at 0
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a: Tensor) -> Tensor:
    y = _sigmoid(a.value)
    return record(y, (a,), lambda g: (g * y * (1.0 - y),))


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": scale,
    "tanh": tanh,
    "sigmoid": sigmoid,
}


def elementwise(kind: str, a: Tensor, b=None) -> Tensor:
    """Dispatch an elementwise op by name."""
    try:
        fn = _ELEMENTWISE[kind]
    except KeyError:
        raise ValueError(f"unknown elementwise kind {kind!r}") from None
    if kind in ("tanh", "sigmoid"):
        if b is not None:
            raise ValueError(f"{kind} is unary")
        return fn(a)
    if b is None:
        raise ValueError(f"{kind} needs a second operand")
    return fn(a, b)


# --------------------------------------------------------------------------
# linear algebra and structure


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; ``a`` may be a vector (treated as a single row)."""
    if b.ndim != 2 or a.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.value, b.value

    if a.ndim == 1:
        def back(g):
            return g @ bv.T, np.outer(av, g)
    else:
        def back(g):
            return g @ bv.T, av.T @ g

    return record(av @ bv, (a, b), back)


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got {x.shape}")
    return record(x.value.T, (x,), lambda g: (g.T,))


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    try:
        out = x.value.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {old} as {shape}") from None
    return record(out, (x,), lambda g: (g.reshape(old),))


def add_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """Add vector ``v`` to every row of matrix ``x``."""
    if x.ndim != 2 or v.ndim != 1 or x.shape[1] != v.shape[0]:
        raise ShapeError(f"add_rowvec: shapes {x.shape} and {v.shape}")
    return record(x.value + v.value, (x, v), lambda g: (g, g.sum(axis=0)))


def scale_rows(x: Tensor, w: Tensor) -> Tensor:
    """Multiply row ``i`` of ``x`` by scalar ``w[i]``."""
    if x.ndim != 2 or w.shape != (x.shape[0],):
        raise ShapeError(f"scale_rows: shapes {x.shape} and {w.shape}")
    xv, wv = x.value, w.value
    return record(xv * wv[:, None], (x, w), lambda g: (g * wv[:, None], (g * xv).sum(axis=1)))


def mul_const(x: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a constant array of the same shape (dropout masks)."""
    if mask.shape != x.shape:
        raise ShapeError(f"mul_const: shapes {x.shape} and {mask.shape}")
    return record(x.value * mask, (x,), lambda g: (g * mask,))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ShapeError("concat: no inputs")
    vals = [t.value for t in tensors]
    try:
        out = np.concatenate(vals, axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {[v.shape for v in vals]}: {exc}") from None
    bounds = np.cumsum([v.shape[axis] for v in vals])[:-1]
    return record(out, tuple(tensors), lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equal-shaped tensors along a new leading axis."""
    if not tensors:
        raise ShapeError("stack: no inputs")
    shape = tensors[0].shape
    for t in tensors:
        if t.shape != shape:
            raise ShapeError(f"stack: shape mismatch {shape} vs {t.shape}")
    out = np.stack([t.value for t in tensors])
    return record(out, tuple(tensors), lambda g: tuple(g))


def index(x: Tensor, key) -> Tensor:
    """Basic or integer-array indexing; repeated indices accumulate."""
    out = x.value[key]
    if not isinstance(out, np.ndarray):
        out = np.array(out)
    shape = x.shape

    basic = isinstance(key, (int, slice)) or (
        isinstance(key, tuple) and all(isinstance(k, (int, slice)) for k in key))

    def back(g):
        full = np.zeros(shape)
        if basic:  # no repeated positions
            full[key] = g
        else:
            np.add.at(full, key, g)
        return (full,)

    return record(out, (x,), back)


def take_rows(x: Tensor, ids) -> Tensor:
    """Gather rows of a 2-D table (embedding lookup)."""
    ids = np.asarray(ids, dtype=np.intp)
    return index(x, ids)


def sum(x: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001
    out = np.asarray(x.value.sum(axis=axis))
    shape = x.shape
    if axis is None:
        return record(out, (x,), lambda g: (np.full(shape, float(g)),))
    return record(out, (x,), lambda g: (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),))


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    n = x.value.size if axis is None else x.shape[axis]
    return scale(sum(x, axis), 1.0 / n)


def square_sum(x: Tensor) -> Tensor:
    xv = x.value
    return record(np.asarray(np.dot(xv.ravel(), xv.ravel())), (x,), lambda g: (2.0 * float(g) * xv,))


# --------------------------------------------------------------------------
# normalisation


def softmax(x: Tensor) -> Tensor:
    """Softmax along the last axis."""
    z = x.value - x.value.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return record(p, (x,), back)


def masked_softmax(scores: Tensor, mask: np.ndarray) -> Tensor:
    """Row softmax ignoring cells where ``mask`` is True.

    Masked cells come out exactly zero. A fully masked row is only legal in
    the 1x1 case, where it is defined as the zero row.
    """
    mask = np.asarray(mask, dtype=bool)
    if scores.ndim != 2 or mask.shape != scores.shape:
        raise ShapeError(f"masked_softmax: scores {scores.shape}, mask {mask.shape}")
    open_ = ~mask
    empty = ~open_.any(axis=1)
    if empty.any() and scores.shape != (1, 1):
        row = int(np.flatnonzero(empty)[0])
        raise DegenerateRowError(f"masked_softmax: row {row} is fully masked")
    s = np.where(open_, scores.value, -np.inf)
    rowmax = s.max(axis=1, keepdims=True)
    rowmax[empty] = 0.0
    e = np.where(open_, np.exp(s - rowmax), 0.0)
    denom = e.sum(axis=1, keepdims=True)
    denom[empty] = 1.0
    p = e / denom

    def back(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return record(p, (scores,), back)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then apply ``gain * xhat + bias``."""
    d = x.shape[-1]
    if d < 2:
        raise ShapeError("layer_norm: last dimension must be at least 2")
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: x {x.shape}, gain {gain.shape}, bias {bias.shape}")
    xv = x.value
    mu = xv.mean(axis=-1, keepdims=True)
    xc = xv - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    gv = gain.value
    lead = tuple(range(x.ndim - 1))

    def back(g):
        dxhat = g * gv
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return record(xhat * gv + bias.value, (x, gain, bias), back)


# --------------------------------------------------------------------------
# recurrent cell


def lstm_gates(pre: Tensor, forget: Tensor | None = None, c_prev: Tensor | None = None) -> Tensor:
    """Pointwise LSTM update fused into one node; returns ``[h, c]`` (2d).

    ``pre`` holds the input, output and candidate pre-activations (3d) in
    that order. ``forget`` holds forget pre-activations, either one row of
    width d or one row per child (k x d) matching ``c_prev``; the cell sums
    ``sigmoid(forget) * c_prev`` over the rows.
    """
    d3 = pre.shape[-1]
    if pre.ndim != 1 or d3 % 3:
        raise ShapeError(f"lstm_gates: pre-activations must be 1-D of width 3d, got {pre.shape}")
    d = d3 // 3
    if (forget is None) != (c_prev is None):
        raise ShapeError("lstm_gates: forget and c_prev go together")
    pv = pre.value
    i, o, u = _sigmoid(pv[:d]), _sigmoid(pv[d:2 * d]), np.tanh(pv[2 * d:])
    c = i * u
    if forget is not None:
        if forget.shape != c_prev.shape or forget.shape[-1] != d:
            raise ShapeError(f"lstm_gates: forget {forget.shape} vs previous cell {c_prev.shape}, d={d}")
        f = _sigmoid(forget.value)
        fc = f * c_prev.value
        c = c + (fc.sum(axis=0) if fc.ndim == 2 else fc)
    tc = np.tanh(c)
    out = np.concatenate([o * tc, c])

    def back(g):
        gh, gc = g[:d], g[d:]
        dc = gc + gh * o * (1.0 - tc * tc)
        dpre = np.concatenate([dc * u * i * (1.0 - i), gh * tc * o * (1.0 - o), dc * i * (1.0 - u * u)])
        if forget is None:
            return (dpre,)
        return dpre, dc * c_prev.value * f * (1.0 - f), dc * f

    parents = (pre,) if forget is None else (pre, forget, c_prev)
    return record(out, parents, back)


# --------------------------------------------------------------------------
# differentiation


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(leaf) into every reachable leaf's ``grad``."""
    if root.value.size != 1 or root.ndim > 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.shape}")
    if not root.requires_grad:
        return
    nodes: dict[int, Tensor] = {}
    todo = [root]
    while todo:
        t = todo.pop()
        if t.node_id in nodes:
            continue
        nodes[t.node_id] = t
        todo.extend(p for p in t._parents if p.requires_grad)
    grads: dict[int, np.ndarray] = {root.node_id: np.ones_like(root.value)}
    for nid in sorted(nodes, reverse=True):
        t = nodes[nid]
        g = grads.pop(nid, None)
        if g is None:
            continue
        if t._backward is None:
            t.grad = t.grad + g if t.grad is not None else np.array(g)
            continue
        for p, pg in zip(t._parents, t._backward(g)):
            if pg is None or not p.requires_grad:
                continue
            prev = grads.get(p.node_id)
            grads[p.node_id] = pg if prev is None else prev + pg


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    ``f`` must rebuild its graph from ``x`` on every call. The relative error
    per coordinate is ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not x.requires_grad:
        raise ValueError("grad_check needs a tensor with requires_grad=True")
    x.zero_grad()
    y = f(x)
    if not np.all(np.isfinite(y.value)):
        raise NumericError("grad_check: non-finite function value")
    backward(y)
    analytic = x.grad.copy()
    numeric = np.zeros_like(analytic)
    flat = x.value.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(x).value)
        flat[i] = orig - eps
        fm = float(f(x).value)
        flat[i] = orig
        numeric.reshape(-1)[i] = (fp - fm) / (2.0 * eps)
    if not (np.all(np.isfinite(numeric)) and np.all(np.isfinite(analytic))):
        raise NumericError("grad_check: non-finite gradient")
    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
