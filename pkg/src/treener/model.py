"""Full tagger: embeddings -> (BiLSTM || Tree-LSTM) -> attention -> CRF."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .attention import AttentionParams, attention_block
from .config import TrainConfig
from .corpus import EmbeddingProvider, Sentence, Vocab, build_tree, embed_tokens
from .crf import CrfParams, crf_nll, project_to_tags, viterbi_decode
from .encoders import EncoderStack, stack_residual

# parameter-name prefixes covered by the l2 penalty
REGULARIZED_PREFIXES = ("tree.", "bilstm.", "rel.", "glob.")


def variational_dropout_mask(d: int, p: float, rng: np.random.Generator | None, train: bool = True) -> np.ndarray:
    """Inverted-dropout mask over one feature axis, shared by every token."""
    if not 0 <= p < 1:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if not train or p == 0:
        return np.ones(d)
    return (rng.random(d) >= p) / (1.0 - p)


class VariationalDropout:
    """Samples a fresh per-sentence mask on every call and tiles it over rows."""

    def __init__(self, p: float, rng: np.random.Generator):
        self.p = p
        self.rng = rng

    def __call__(self, x: T.Tensor) -> T.Tensor:
        if self.p == 0:
            return x
        mask = variational_dropout_mask(x.shape[-1], self.p, self.rng)
        full = np.broadcast_to(mask, x.shape)
        return T.mul_const(x, np.ascontiguousarray(full))


@dataclass
class AttentionRecord:
    sid: int
    A: np.ndarray | None  # N x N relative attention
    a: np.ndarray | None  # N global weights

    @property
    def most_attended(self) -> list[int] | None:
        if self.A is None or self.A.shape[0] < 2:
            return None
        return [int(j) for j in np.argmax(self.A, axis=1)]


class Model:
    """All trainable weights plus the vocabulary and config that shaped them."""

    def __init__(self, config: TrainConfig, vocab: Vocab, provider: EmbeddingProvider | None = None,
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.config = config
        if provider is None:
            provider = EmbeddingProvider(vocab, config.d_w, rng, use_pos=config.use_pos,
                                         use_deprel=config.use_deprel, freeze=config.freeze_embeddings)
        self.provider = provider
        self.vocab = provider.vocab
        d_in = provider.dim
        c = config
        self.tree = EncoderStack.init("tree", d_in, c.d_h, c.depth, rng, c.residual) if c.use_tree else None
        self.bilstm = EncoderStack.init("bilstm", d_in, c.d_h, c.depth, rng, c.residual) if c.use_blstm else None
        self.d_a = (c.d_h if c.use_tree else 0) + (2 * c.d_h if c.use_blstm else 0)
        self.attention = AttentionParams.init(self.d_a, self.d_a, rng, relative=c.use_relative,
                                              global_=c.use_global, residual=c.residual, d_att=c.d_att or None)
        self.crf = CrfParams.init(self.d_a, len(self.vocab.labels), rng)

    @property
    def labels(self) -> list[str]:
        return self.vocab.id_to_label

    def named_parameters(self):
        """Trainable tensors; frozen embedding tables are skipped."""
        yield from self.provider.named_parameters()
        for part in (self.tree, self.bilstm, self.attention, self.crf):
            if part is not None:
                yield from part.named_parameters()

    def named_tensors(self):
        """Every stored tensor, frozen ones included."""
        yield from self.provider.named_tensors()
        for part in (self.tree, self.bilstm, self.attention, self.crf):
            if part is not None:
                yield from part.named_parameters()

    def parameters(self) -> list[T.Tensor]:
        return [p for _, p in self.named_parameters()]

    def regularized(self):
        return [(n, p) for n, p in self.named_parameters() if n.startswith(REGULARIZED_PREFIXES)]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state(self) -> dict[str, np.ndarray]:
        return {n: t.value.copy() for n, t in self.named_tensors()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for n, t in self.named_tensors():
            t.value[...] = state[n]

    # ------------------------------------------------------------------

    def forward(self, sentence: Sentence, mode: str = "eval", rng: np.random.Generator | None = None):
        return model_forward(sentence, self, mode, rng)

    def loss(self, sentence: Sentence, mode: str = "train", rng=None) -> T.Tensor:
        emissions, _ = self.forward(sentence, mode, rng)
        return crf_nll(emissions, self.crf, self.vocab.label_ids(sentence.labels))

    def predict(self, sentence: Sentence) -> list[str]:
        with T.no_grad():
            emissions, _ = self.forward(sentence, "eval")
        path, _ = viterbi_decode(emissions, self.crf, self.labels, self.config.constrain_decoding)
        return [self.labels[k] for k in path]

    def predict_with_attention(self, sentence: Sentence):
        with T.no_grad():
            emissions, record = self.forward(sentence, "eval")
        path, _ = viterbi_decode(emissions, self.crf, self.labels, self.config.constrain_decoding)
        return [self.labels[k] for k in path], record


def model_forward(sentence: Sentence, model: Model, mode: str = "eval", rng: np.random.Generator | None = None):
    """Emissions (N x L) and the attention record for one sentence.

    In ``train`` mode with a positive dropout rate, ``rng`` drives the
    variational masks; ``eval`` mode is deterministic.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    cfg = model.config
    drop = None
    if mode == "train" and cfg.dropout > 0:
        if rng is None:
            raise ValueError("train mode with dropout needs an rng")
        drop = VariationalDropout(cfg.dropout, rng)

    x = embed_tokens(sentence, model.provider)
    outputs, queries = [], []
    if model.bilstm is not None:
        Hb, h_last = stack_residual(model.bilstm, x, dropout=drop)
        outputs.append(Hb)
        queries.append(h_last)
    if model.tree is not None:
        Ht, h_root = stack_residual(model.tree, x, build_tree(sentence), dropout=drop)
        outputs.append(Ht)
        queries.append(h_root)
    H = outputs[0] if len(outputs) == 1 else T.concat(outputs, axis=1)
    # query: tree root state first, then the BiLSTM summary
    q = queries[0] if len(queries) == 1 else T.concat(queries[::-1])
    out, A, a = attention_block(H, q, model.attention, order=cfg.attention_order, dropout=drop)
    if drop is not None:
        out = drop(out)
    emissions = project_to_tags(out, model.crf)
    record = AttentionRecord(sentence.sid,
                             None if A is None else A.value.copy(),
                             None if a is None else a.value.copy())
    return emissions, record
