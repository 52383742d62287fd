"""Child-Sum Tree-LSTM and bidirectional LSTM encoders with residual stacking.

Both cell types store their gate weights concatenated, in the order
``[i, o, u, f]``: columns ``[0, d)`` are the input gate, ``[d, 2d)`` the
output gate, ``[2d, 3d)`` the candidate and ``[3d, 4d)`` the forget gate.
Keeping ``i, o, u`` contiguous lets one matmul serve all three gates that
read the summed child state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tensor as T
from .corpus import DepTree, xavier
from .errors import ShapeError

GATES = ("i", "o", "u", "f")

Dropout = Callable[[T.Tensor], T.Tensor]


@dataclass
class LstmParams:
    W: T.Tensor  # d_in x 4d_h
    U: T.Tensor  # d_h x 4d_h
    b: T.Tensor  # 4d_h

    @classmethod
    def init(cls, d_in: int, d_h: int, rng: np.random.Generator, prefix: str = "") -> "LstmParams":
        W = np.concatenate([xavier(rng, d_in, d_h) for _ in GATES], axis=1)
        U = np.concatenate([xavier(rng, d_h, d_h) for _ in GATES], axis=1)
        return cls(T.parameter(W, prefix + "W"), T.parameter(U, prefix + "U"),
                   T.parameter(np.zeros(4 * d_h), prefix + "b"))

    @property
    def d_in(self) -> int:
        return self.W.shape[0]

    @property
    def d_h(self) -> int:
        return self.U.shape[0]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Views ``(W^(g), U^(g), b^(g))`` of one gate."""
        k = GATES.index(name)
        d = self.d_h
        cols = slice(k * d, (k + 1) * d)
        return self.W.value[:, cols], self.U.value[:, cols], self.b.value[cols]

    def named_parameters(self):
        yield self.W.name, self.W
        yield self.U.name, self.U
        yield self.b.name, self.b


# the Child-Sum cell has the same eight matrices and four biases
TreeLstmParams = LstmParams


@dataclass
class BiLstmParams:
    fwd: LstmParams
    bwd: LstmParams

    @classmethod
    def init(cls, d_in, d_h, rng, prefix=""):
        return cls(LstmParams.init(d_in, d_h, rng, prefix + "fwd."),
                   LstmParams.init(d_in, d_h, rng, prefix + "bwd."))

    @property
    def d_in(self) -> int:
        return self.fwd.d_in

    @property
    def d_out(self) -> int:
        return 2 * self.fwd.d_h

    def named_parameters(self):
        yield from self.fwd.named_parameters()
        yield from self.bwd.named_parameters()


def _check_inputs(inputs: T.Tensor, params: LstmParams, n: int | None = None) -> None:
    if inputs.ndim != 2 or inputs.shape[1] != params.d_in:
        raise ShapeError(f"encoder input {inputs.shape} does not match d_in={params.d_in}")
    if n is not None and inputs.shape[0] != n:
        raise ShapeError(f"{inputs.shape[0]} input rows for a {n}-node tree")


def tree_lstm_forward(tree: DepTree, inputs: T.Tensor, params: LstmParams):
    """Run a Child-Sum Tree-LSTM bottom-up over ``tree``.

    Returns ``(H, h_root)`` where ``H`` holds one hidden state per token (in
    token order) and ``h_root`` is the root state, or the mean of the root
    states when the tree has several roots.
    """
    n = len(tree)
    _check_inputs(inputs, params, n)
    d = params.d_h
    xw = T.add_rowvec(T.matmul(inputs, params.W), params.b)
    xw_iou = xw[:, : 3 * d]
    xw_f = xw[:, 3 * d:]
    U_iou = params.U[:, : 3 * d]
    U_f = params.U[:, 3 * d:]

    hs: list[T.Tensor | None] = [None] * n
    cs: list[T.Tensor | None] = [None] * n
    for j in tree.postorder():
        kids = tree.children[j]
        pre = xw_iou[j]
        if kids:
            h_kids = T.stack([hs[k] for k in kids])
            c_kids = T.stack([cs[k] for k in kids])
            pre = pre + T.matmul(T.sum(h_kids, axis=0), U_iou)
            hc = T.lstm_gates(pre, T.add_rowvec(T.matmul(h_kids, U_f), xw_f[j]), c_kids)
        else:
            hc = T.lstm_gates(pre)
        hs[j] = hc[:d]
        cs[j] = hc[d:]
    if len(hs) != n or any(h is None for h in hs):
        raise ShapeError("tree traversal did not visit every node")
    H = T.stack(hs)
    if len(tree.roots) == 1:
        h_root = hs[tree.roots[0]]
    else:
        h_root = T.mean(T.stack([hs[r] for r in tree.roots]), axis=0)
    return H, h_root


def lstm_forward(inputs: T.Tensor, params: LstmParams, reverse: bool = False) -> list[T.Tensor]:
    """Unidirectional LSTM from zero initial state; returns states in token order."""
    _check_inputs(inputs, params)
    n = inputs.shape[0]
    d = params.d_h
    xw = T.add_rowvec(T.matmul(inputs, params.W), params.b)
    out: list[T.Tensor | None] = [None] * n
    h = c = None
    for t in (range(n - 1, -1, -1) if reverse else range(n)):
        pre = xw[t]
        if h is None:
            hc = T.lstm_gates(pre[: 3 * d])
        else:
            pre = pre + T.matmul(h, params.U)
            hc = T.lstm_gates(pre[: 3 * d], pre[3 * d:], c)
        h, c = hc[:d], hc[d:]
        out[t] = h
    return out


def bilstm_forward(inputs: T.Tensor, params: BiLstmParams):
    """Returns ``(H, h_last)``; ``h_last`` is the forward state at the last
    token joined with the backward state at the first token."""
    fwd = lstm_forward(inputs, params.fwd)
    bwd = lstm_forward(inputs, params.bwd, reverse=True)
    H = T.concat([T.stack(fwd), T.stack(bwd)], axis=1)
    return H, T.concat([fwd[-1], bwd[0]])


@dataclass
class LayerNormParams:
    gain: T.Tensor
    bias: T.Tensor

    @classmethod
    def init(cls, d: int, prefix: str = "") -> "LayerNormParams":
        return cls(T.parameter(np.ones(d), prefix + "gain"), T.parameter(np.zeros(d), prefix + "bias"))

    def __call__(self, x: T.Tensor) -> T.Tensor:
        return T.layer_norm(x, self.gain, self.bias)

    def named_parameters(self):
        yield self.gain.name, self.gain
        yield self.bias.name, self.bias


@dataclass
class EncoderStack:
    """Stacked layers of one encoder kind (``"tree"`` or ``"bilstm"``).

    With ``residual`` on, every layer whose input and output widths agree is
    wrapped as ``LayerNorm(x + layer(x))``. The first layer usually changes
    width and then runs plain.
    """

    kind: str
    layers: list
    residual: bool = True
    norms: dict[int, LayerNormParams] = field(default_factory=dict)

    @classmethod
    def init(cls, kind: str, d_in: int, d_h: int, depth: int, rng, residual: bool = True,
             prefix: str | None = None) -> "EncoderStack":
        if depth < 1:
            raise ValueError("depth must be >= 1")
        prefix = prefix if prefix is not None else kind + "."
        layers, norms = [], {}
        width = d_in
        for ell in range(depth):
            p = f"{prefix}{ell}."
            if kind == "tree":
                layer = LstmParams.init(width, d_h, rng, p)
                out = d_h
            elif kind == "bilstm":
                layer = BiLstmParams.init(width, d_h, rng, p)
                out = 2 * d_h
            else:
                raise ValueError(f"unknown encoder kind {kind!r}")
            if residual and width == out:
                norms[ell] = LayerNormParams.init(out, p + "ln.")
            layers.append(layer)
            width = out
        return cls(kind, layers, residual, norms)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def d_out(self) -> int:
        last = self.layers[-1]
        return last.d_out if self.kind == "bilstm" else last.d_h

    def named_parameters(self):
        for ell, layer in enumerate(self.layers):
            yield from layer.named_parameters()
            if ell in self.norms:
                yield from self.norms[ell].named_parameters()


def _layer_dims(kind, layer):
    return (layer.d_in, layer.d_out) if kind == "bilstm" else (layer.d_in, layer.d_h)


def stack_residual(stack: EncoderStack, inputs: T.Tensor, tree: DepTree | None = None,
                   dropout: Dropout | None = None):
    """Run every layer of ``stack``; returns ``(H, summary)``.

    ``summary`` is the last layer's ``h_root`` (tree) or ``h_last``
    (bilstm). ``dropout``, when given, is applied to each layer's input.
    """
    if stack.kind == "tree" and tree is None:
        raise ValueError("tree encoder needs a dependency tree")
    x = inputs
    summary = None
    for ell, layer in enumerate(stack.layers):
        d_in, d_out = _layer_dims(stack.kind, layer)
        if x.shape[1] != d_in:
            raise ShapeError(f"layer {ell}: input width {x.shape[1]} != {d_in}")
        wrap = stack.residual and d_in == d_out
        if stack.residual and ell > 0 and not wrap:
            raise ShapeError(f"layer {ell}: residual needs equal widths, got {d_in} -> {d_out}")
        if wrap and ell not in stack.norms:
            raise ShapeError(f"layer {ell}: residual layer has no layer-norm parameters")
        inp = dropout(x) if dropout is not None else x
        if stack.kind == "tree":
            y, summary = tree_lstm_forward(tree, inp, layer)
        else:
            y, summary = bilstm_forward(inp, layer)
        x = stack.norms[ell](x + y) if wrap else y
    return x, summary
