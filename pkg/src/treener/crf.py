"""Tag projection, linear-chain CRF likelihood and Viterbi decoding.

A path ``y`` scores ``start[y_0] + sum_t E[t, y_t] + sum_t T[y_{t-1}, y_t] +
stop[y_{N-1}]``. The loss is the per-token negative log-likelihood
``(log Z - score(gold)) / N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .corpus import xavier
from .errors import LabelError, ShapeError

PENALTY = -1e4


@dataclass
class CrfParams:
    transitions: T.Tensor  # L x L, row = previous label
    start: T.Tensor
    stop: T.Tensor
    W_tag: T.Tensor  # d x L
    b_tag: T.Tensor

    @classmethod
    def init(cls, d: int, n_labels: int, rng, prefix: str = "crf.") -> "CrfParams":
        return cls(
            T.parameter(np.zeros((n_labels, n_labels)), prefix + "transitions"),
            T.parameter(np.zeros(n_labels), prefix + "start"),
            T.parameter(np.zeros(n_labels), prefix + "stop"),
            T.parameter(xavier(rng, d, n_labels), prefix + "W_tag"),
            T.parameter(np.zeros(n_labels), prefix + "b_tag"),
        )

    @property
    def n_labels(self) -> int:
        return self.start.shape[0]

    def named_parameters(self):
        for t in (self.transitions, self.start, self.stop, self.W_tag, self.b_tag):
            yield t.name, t


def project_to_tags(H: T.Tensor, params: CrfParams) -> T.Tensor:
    if H.ndim != 2 or H.shape[1] != params.W_tag.shape[0]:
        raise ShapeError(f"project_to_tags: input {H.shape}, W_tag {params.W_tag.shape}")
    return T.add_rowvec(T.matmul(H, params.W_tag), params.b_tag)


def logsumexp(x: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(x - m).sum(axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def forward_scores(E: np.ndarray, trans: np.ndarray, start: np.ndarray, stop: np.ndarray):
    """Log-domain forward recursion; returns ``(alpha, log_Z)``."""
    n = E.shape[0]
    alpha = np.empty_like(E)
    alpha[0] = start + E[0]
    for t in range(1, n):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + trans, axis=0) + E[t]
    return alpha, float(logsumexp(alpha[-1] + stop, axis=0))


def backward_scores(E, trans, stop) -> np.ndarray:
    n = E.shape[0]
    beta = np.empty_like(E)
    beta[-1] = stop
    for t in range(n - 2, -1, -1):
        beta[t] = logsumexp(trans + (E[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def path_score(E, trans, start, stop, labels: Sequence[int]) -> float:
    y = list(labels)
    s = start[y[0]] + stop[y[-1]] + sum(E[t, k] for t, k in enumerate(y))
    s += sum(trans[y[t - 1], y[t]] for t in range(1, len(y)))
    return float(s)


def _check_gold(gold, n, n_labels):
    gold = [int(g) for g in gold]
    if len(gold) != n:
        raise LabelError(f"gold has {len(gold)} labels for {n} tokens")
    for g in gold:
        if not 0 <= g < n_labels:
            raise LabelError(f"label id {g} out of range [0, {n_labels})")
    return gold


def crf_nll(emissions: T.Tensor, params: CrfParams, gold: Sequence[int]) -> T.Tensor:
    """Per-token CRF negative log-likelihood of ``gold`` (a scalar tensor).

    Gradients come from forward-backward marginals rather than from
    differentiating the recursion op by op.
    """
    E = emissions.value
    if E.ndim != 2 or E.shape[1] != params.n_labels:
        raise ShapeError(f"crf_nll: emissions {E.shape} for {params.n_labels} labels")
    n, L = E.shape
    gold = _check_gold(gold, n, L)
    tr, st, sp = params.transitions.value, params.start.value, params.stop.value
    alpha, log_z = forward_scores(E, tr, st, sp)
    gold_score = path_score(E, tr, st, sp, gold)
    loss = (log_z - gold_score) / n

    def back(g):
        beta = backward_scores(E, tr, sp)
        node = np.exp(alpha + beta - log_z)
        if n > 1:
            edge = np.exp(alpha[:-1, :, None] + tr[None] + (E[1:] + beta[1:])[:, None, :] - log_z).sum(axis=0)
        else:
            edge = np.zeros_like(tr)
        d_E, d_tr = node.copy(), edge
        d_st, d_sp = node[0].copy(), node[-1].copy()
        for t, k in enumerate(gold):
            d_E[t, k] -= 1.0
        for t in range(1, n):
            d_tr[gold[t - 1], gold[t]] -= 1.0
        d_st[gold[0]] -= 1.0
        d_sp[gold[-1]] -= 1.0
        c = float(g) / n
        return d_E * c, d_tr * c, d_st * c, d_sp * c

    return T.record(np.asarray(loss), (emissions, params.transitions, params.start, params.stop), back)


def bio_disallowed(labels: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Masks of forbidden ``prev -> next`` transitions and forbidden first labels."""
    L = len(labels)
    trans = np.zeros((L, L), dtype=bool)
    first = np.zeros(L, dtype=bool)
    for j, lab in enumerate(labels):
        if not lab.startswith("I-"):
            continue
        first[j] = True
        typ = lab[2:]
        for i, prev in enumerate(labels):
            if prev not in (f"B-{typ}", f"I-{typ}"):
                trans[i, j] = True
    return trans, first


def viterbi_decode(emissions, params: CrfParams, labels: Sequence[str] | None = None,
                   constrain: bool = False) -> tuple[list[int], float]:
    """Best label path and its score.

    With ``constrain`` on, BIO-invalid transitions (and an ``I-`` label at the
    first position) are pinned to a -1e4 score; ``labels`` names the ids.
    Ties go to the lowest label id.
    """
    E = emissions.value if isinstance(emissions, T.Tensor) else np.asarray(emissions, dtype=np.float64)
    n, L = E.shape
    if n < 1:
        raise ShapeError("viterbi_decode: empty sequence")
    tr = params.transitions.value.copy()
    st = params.start.value.copy()
    sp = params.stop.value
    if constrain:
        if labels is None:
            raise ValueError("constrained decoding needs label names")
        bad_tr, bad_first = bio_disallowed(labels)
        tr[bad_tr] = PENALTY
        st[bad_first] = PENALTY
    delta = st + E[0]
    back = np.zeros((n, L), dtype=np.intp)
    for t in range(1, n):
        cand = delta[:, None] + tr
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(L)] + E[t]
    final = delta + sp
    best = int(np.argmax(final))
    path = [best]
    for t in range(n - 1, 0, -1):
        best = int(back[t, best])
        path.append(best)
    path.reverse()
    return path, float(final[path[-1]])
