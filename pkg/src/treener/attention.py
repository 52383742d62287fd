"""Relative (diagonal-masked) and global (query-conditioned) attention."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .corpus import xavier
from .encoders import Dropout, LayerNormParams
from .errors import ShapeError


@dataclass
class RelativeAttentionParams:
    W_Q: T.Tensor
    W_K: T.Tensor
    W_V: T.Tensor

    @classmethod
    def init(cls, d_a: int, rng, prefix: str = "rel.") -> "RelativeAttentionParams":
        return cls(*(T.parameter(xavier(rng, d_a, d_a), prefix + k) for k in ("W_Q", "W_K", "W_V")))

    @property
    def d_a(self) -> int:
        return self.W_Q.shape[0]

    def named_parameters(self):
        for t in (self.W_Q, self.W_K, self.W_V):
            yield t.name, t


@dataclass
class GlobalAttentionParams:
    W_h: T.Tensor  # d_att x d_h
    W_q: T.Tensor  # d_att x d_q
    b_h: T.Tensor
    b_q: T.Tensor
    v: T.Tensor

    @classmethod
    def init(cls, d_h: int, d_q: int, d_att: int, rng, prefix: str = "glob.") -> "GlobalAttentionParams":
        return cls(
            T.parameter(xavier(rng, d_att, d_h), prefix + "W_h"),
            T.parameter(xavier(rng, d_att, d_q), prefix + "W_q"),
            T.parameter(np.zeros(d_att), prefix + "b_h"),
            T.parameter(np.zeros(d_att), prefix + "b_q"),
            T.parameter(xavier(rng, d_att, 1)[:, 0], prefix + "v"),
        )

    def named_parameters(self):
        for t in (self.W_h, self.W_q, self.b_h, self.b_q, self.v):
            yield t.name, t


def diagonal_mask(n: int) -> np.ndarray:
    return np.eye(n, dtype=bool)


def relative_attention(H: T.Tensor, params: RelativeAttentionParams):
    """Scaled dot-product attention that never attends a word to itself.

    Returns ``(M, A)`` with ``M = A V + V``. For a one-word sentence ``A`` is
    the 1x1 zero matrix, so ``M = V``.
    """
    if H.ndim != 2 or H.shape[1] != params.d_a:
        raise ShapeError(f"relative_attention: input {H.shape}, d_a={params.d_a}")
    n, d_a = H.shape
    Q = T.matmul(H, params.W_Q)
    K = T.matmul(H, params.W_K)
    V = T.matmul(H, params.W_V)
    scores = T.scale(T.matmul(Q, T.transpose(K)), d_a ** -0.5)
    A = T.masked_softmax(scores, diagonal_mask(n))
    return T.matmul(A, V) + V, A


def global_attention(H: T.Tensor, q: T.Tensor, params: GlobalAttentionParams):
    """Additive attention over rows of ``H`` conditioned on sentence vector ``q``.

    Returns ``(Z, a)`` where ``a`` is a distribution over words and row ``i``
    of ``Z`` is ``a[i] * H[i]``.
    """
    if H.ndim != 2 or H.shape[1] != params.W_h.shape[1]:
        raise ShapeError(f"global_attention: input {H.shape}, W_h {params.W_h.shape}")
    if q.shape != (params.W_q.shape[1],):
        raise ShapeError(f"global_attention: query {q.shape}, W_q {params.W_q.shape}")
    context = T.matmul(params.W_q, T.reshape(q, (-1, 1)))
    context = T.reshape(context, (-1,)) + params.b_q + params.b_h
    proj = T.add_rowvec(T.matmul(H, T.transpose(params.W_h)), context)
    u = T.matmul(T.tanh(proj), T.reshape(params.v, (-1, 1)))
    a = T.softmax(T.reshape(u, (-1,)))
    return T.scale_rows(H, a), a


@dataclass
class AttentionParams:
    rel: RelativeAttentionParams | None
    glob: GlobalAttentionParams | None
    ln_rel: LayerNormParams | None
    ln_glob: LayerNormParams | None

    @classmethod
    def init(cls, d_a: int, d_q: int, rng, *, relative=True, global_=True, residual=True,
             d_att: int | None = None) -> "AttentionParams":
        d_att = d_att or d_a
        rel = RelativeAttentionParams.init(d_a, rng) if relative else None
        glob = GlobalAttentionParams.init(d_a, d_q, d_att, rng) if global_ else None
        ln_rel = LayerNormParams.init(d_a, "rel.ln.") if relative and residual else None
        ln_glob = LayerNormParams.init(d_a, "glob.ln.") if global_ and residual else None
        return cls(rel, glob, ln_rel, ln_glob)

    def named_parameters(self):
        for part in (self.rel, self.ln_rel, self.glob, self.ln_glob):
            if part is not None:
                yield from part.named_parameters()


def attention_block(H: T.Tensor, q: T.Tensor | None, params: AttentionParams, *,
                    order: str = "serial", dropout: Dropout | None = None):
    """Relative then global attention, each wrapped as ``LayerNorm(x + f(x))``.

    A stage whose parameters are absent is the identity; a stage without
    layer-norm parameters returns ``f(x)`` directly (residual switched off).
    With ``order="parallel"`` the global stage reads the block input instead
    of the relative stage's output.

    Returns ``(out, A, a)``; ``A``/``a`` are None for disabled stages.
    """
    if order not in ("serial", "parallel"):
        raise ValueError(f"unknown attention order {order!r}")
    drop = dropout or (lambda x: x)
    A = a = None
    x = H
    if params.rel is not None:
        M, A = relative_attention(drop(H), params.rel)
        x = params.ln_rel(H + M) if params.ln_rel is not None else M
    if params.glob is not None:
        if q is None:
            raise ValueError("global attention needs a query vector")
        src = x if order == "serial" else H
        Z, a = global_attention(drop(src), q, params.glob)
        x = params.ln_glob(x + Z) if params.ln_glob is not None else Z
    return x, A, a
