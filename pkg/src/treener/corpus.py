"""Corpus reading, dependency-tree validation, vocabularies and token embedding.

Corpus files are six-column TSV::

    index<TAB>word<TAB>pos<TAB>head<TAB>deprel<TAB>label

one token per line, a blank line between sentences. ``head`` is the 1-based
index of the governing token, 0 for a root.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import tensor as T
from .errors import ParseError, ShapeError, TopologyError, VocabError

UNK = "<unk>"
N_COLUMNS = 6
_BIO = re.compile(r"^(O|[BI]-\S+)$")


@dataclass(frozen=True)
class Token:
    index: int
    word: str
    pos: str
    head: int
    deprel: str
    label: str = "O"


@dataclass
class Sentence:
    tokens: list[Token]
    sid: int = 0

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def words(self) -> list[str]:
        return [t.word for t in self.tokens]

    @property
    def labels(self) -> list[str]:
        return [t.label for t in self.tokens]

    @property
    def heads(self) -> list[int]:
        return [t.head for t in self.tokens]

    def with_labels(self, labels: Sequence[str]) -> "Sentence":
        toks = [Token(t.index, t.word, t.pos, t.head, t.deprel, lab) for t, lab in zip(self.tokens, labels)]
        return Sentence(toks, self.sid)


# --------------------------------------------------------------------------
# trees


@dataclass
class DepTree:
    """Dependency tree over 0-based node ids (node ``i`` is token ``i + 1``)."""

    heads: list[int]  # 1-based heads as in the file, 0 = virtual root
    children: list[list[int]]
    roots: list[int]

    def __len__(self) -> int:
        return len(self.heads)

    def parent(self, i: int) -> int | None:
        h = self.heads[i]
        return None if h == 0 else h - 1

    def postorder(self) -> list[int]:
        """Children before parents, roots in ascending order."""
        order: list[int] = []
        for r in self.roots:
            stack = [(r, False)]
            while stack:
                node, expanded = stack.pop()
                if expanded:
                    order.append(node)
                    continue
                stack.append((node, True))
                for c in reversed(self.children[node]):
                    stack.append((c, False))
        return order

    def edges(self) -> int:
        return sum(len(c) for c in self.children)


def build_tree(heads: Sequence[int] | Sentence) -> DepTree:
    """Validate head indices and build child lists.

    Accepts a Sentence or a list of 1-based heads. Raises TopologyError on a
    self-loop, out-of-range head, missing root, or any node not reachable
    from a root (which, with one head per node, means a cycle).
    """
    if isinstance(heads, Sentence):
        heads = heads.heads
    heads = list(heads)
    n = len(heads)
    children: list[list[int]] = [[] for _ in range(n)]
    roots = []
    for i, h in enumerate(heads):
        if not 0 <= h <= n:
            raise TopologyError(f"token {i + 1}: head {h} out of range [0, {n}]")
        if h == i + 1:
            raise TopologyError(f"token {i + 1}: self-loop")
        if h == 0:
            roots.append(i)
        else:
            children[h - 1].append(i)
    if n and not roots:
        raise TopologyError("tree has no root (cycle)")
    seen = 0
    stack = list(roots)
    while stack:
        node = stack.pop()
        seen += 1
        stack.extend(children[node])
    if seen != n:
        raise TopologyError(f"cycle: only {seen} of {n} tokens reachable from a root")
    return DepTree(heads=heads, children=children, roots=roots)


# --------------------------------------------------------------------------
# file io


def check_bio(labels: Sequence[str]) -> int | None:
    """Return the position of the first BIO violation, or None."""
    prev = "O"
    for i, lab in enumerate(labels):
        if not _BIO.match(lab):
            return i
        if lab.startswith("I-") and prev[2:] != lab[2:]:
            return i
        prev = lab
    return None


def _parse_block(rows, path) -> Sentence:
    tokens = []
    for k, (lineno, cols) in enumerate(rows):
        if len(cols) != N_COLUMNS:
            raise ParseError(f"expected {N_COLUMNS} columns, got {len(cols)}", path, lineno)
        try:
            idx = int(cols[0])
        except ValueError:
            raise ParseError(f"non-integer index {cols[0]!r}", path, lineno, 1) from None
        if idx != k + 1:
            raise ParseError(f"index {idx} out of sequence (expected {k + 1})", path, lineno, 1)
        try:
            head = int(cols[3])
        except ValueError:
            raise ParseError(f"non-integer head {cols[3]!r}", path, lineno, 4) from None
        if not _BIO.match(cols[5]):
            raise ParseError(f"invalid BIO label {cols[5]!r}", path, lineno, 6)
        tokens.append(Token(idx, cols[1], cols[2], head, cols[4], cols[5]))
    n = len(tokens)
    for (lineno, _), tok in zip(rows, tokens):
        if tok.head == tok.index:
            raise ParseError("self-loop: head equals own index (cycle)", path, lineno, 4)
        if not 0 <= tok.head <= n:
            raise ParseError(f"head {tok.head} out of range", path, lineno, 4)
    bad = check_bio([t.label for t in tokens])
    if bad is not None:
        raise ParseError(f"I- label {tokens[bad].label!r} does not continue an entity", path, rows[bad][0], 6)
    sent = Sentence(tokens)
    try:
        build_tree(sent)
    except TopologyError as exc:
        raise ParseError(f"invalid dependency tree: {exc}", path, rows[0][0]) from None
    return sent


def parse_conll_lines(lines: Iterable[str], path=None) -> list[Sentence]:
    sentences: list[Sentence] = []
    block: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            if block:
                sentences.append(_parse_block(block, path))
                block = []
            continue
        block.append((lineno, line.split("\t")))
    if block:
        sentences.append(_parse_block(block, path))
    for i, s in enumerate(sentences):
        s.sid = i
    return sentences


def parse_conll(path: str | os.PathLike) -> list[Sentence]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_conll_lines(fh, path)


def format_conll(sentences: Iterable[Sentence], predictions: Sequence[Sequence[str]] | None = None) -> str:
    out = []
    for k, sent in enumerate(sentences):
        for i, t in enumerate(sent.tokens):
            cols = [str(t.index), t.word, t.pos, str(t.head), t.deprel, t.label]
            if predictions is not None:
                cols.append(predictions[k][i])
            out.append("\t".join(cols))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def write_conll(path, sentences, predictions=None) -> None:
    from .io_utils import atomic_write_text

    atomic_write_text(path, format_conll(sentences, predictions))


# --------------------------------------------------------------------------
# vocabularies


def _index(items: Iterable[str], unk: bool) -> dict[str, int]:
    table = {UNK: 0} if unk else {}
    for it in sorted(set(items)):
        if it not in table:
            table[it] = len(table)
    return table


@dataclass
class Vocab:
    words: dict[str, int]
    pos: dict[str, int]
    deprels: dict[str, int]
    labels: dict[str, int]
    id_to_label: list[str] = field(init=False, repr=False)

    def __post_init__(self):
        self.id_to_label = [None] * len(self.labels)
        for lab, i in self.labels.items():
            self.id_to_label[i] = lab

    def word_id(self, w: str) -> int:
        return self.words.get(w, 0)

    def pos_id(self, p: str) -> int:
        return self.pos.get(p, 0)

    def deprel_id(self, r: str) -> int:
        return self.deprels.get(r, 0)

    def label_id(self, lab: str) -> int:
        try:
            return self.labels[lab]
        except KeyError:
            raise VocabError(f"label {lab!r} not in the label vocabulary") from None

    def label_ids(self, labels: Sequence[str]) -> list[int]:
        return [self.label_id(lab) for lab in labels]

    def to_dict(self) -> dict:
        return {"words": self.words, "pos": self.pos, "deprels": self.deprels, "labels": self.labels}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocab":
        return cls(dict(d["words"]), dict(d["pos"]), dict(d["deprels"]), dict(d["labels"]))


def build_vocab(corpus: Sequence[Sentence], extra_labels: Iterable[str] = ()) -> Vocab:
    """Deterministic vocabularies; word, POS and deprel ids start with ``<unk>`` at 0."""
    if not corpus:
        raise ValueError("build_vocab: empty corpus")
    toks = [t for s in corpus for t in s.tokens]
    return Vocab(
        words=_index((t.word for t in toks), unk=True),
        pos=_index((t.pos for t in toks), unk=True),
        deprels=_index((t.deprel for t in toks), unk=True),
        labels=_index([t.label for t in toks] + list(extra_labels), unk=False),
    )


# --------------------------------------------------------------------------
# embeddings


def xavier(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    a = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-a, a, size=(rows, cols))


def read_vectors(path) -> tuple[list[str], np.ndarray]:
    """Read a precomputed-embedding file (header ``d_w N``)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParseError("header must be 'd_w N'", path, 1)
        try:
            dim, count = int(header[0]), int(header[1])
        except ValueError:
            raise ParseError("non-integer header", path, 1) from None
        words, rows = [], []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            if not parts or parts == [""]:
                continue
            if len(parts) != dim + 1:
                raise ParseError(f"expected {dim} values, got {len(parts) - 1}", path, lineno)
            try:
                rows.append([float(v) for v in parts[1:]])
            except ValueError:
                raise ParseError("non-numeric vector entry", path, lineno) from None
            words.append(parts[0])
    if len(words) != count:
        raise ParseError(f"header announces {count} vectors, found {len(words)}", path, 1)
    return words, np.asarray(rows, dtype=np.float64).reshape(len(words), dim)


def write_vectors(path, words: Sequence[str], vectors: np.ndarray) -> None:
    lines = [f"{vectors.shape[1]} {len(words)}"]
    lines += [w + " " + " ".join(repr(float(v)) for v in row) for w, row in zip(words, vectors)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class EmbeddingProvider:
    """Word, POS and dependency-relation tables concatenated per token.

    ``kind`` is ``"table"`` (trainable, Xavier-initialised) or
    ``"precomputed"`` (loaded from a vector file, frozen by default). The
    POS and deprel tables are always trainable and have ``d_w // 4`` columns.
    """

    def __init__(self, vocab: Vocab, d_w: int, rng: np.random.Generator | None = None, *,
                 kind: str = "table", word_vectors: np.ndarray | None = None,
                 freeze: bool | None = None, use_pos: bool = True, use_deprel: bool = True):
        if kind not in ("table", "precomputed"):
            raise ValueError(f"unknown embedding kind {kind!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.vocab = vocab
        self.kind = kind
        self.d_w = d_w
        self.d_tag = d_w // 4
        self.use_pos = use_pos
        self.use_deprel = use_deprel
        self.freeze = (kind == "precomputed") if freeze is None else freeze
        if word_vectors is not None:
            if word_vectors.shape != (len(vocab.words), d_w):
                raise ShapeError(f"word vectors {word_vectors.shape}, expected {(len(vocab.words), d_w)}")
            table = np.array(word_vectors, dtype=np.float64)
        else:
            table = xavier(rng, len(vocab.words), d_w)
        self.word = T.Tensor(table, requires_grad=not self.freeze, name="embed.word")
        self.pos = T.parameter(xavier(rng, len(vocab.pos), self.d_tag), "embed.pos")
        self.deprel = T.parameter(xavier(rng, len(vocab.deprels), self.d_tag), "embed.deprel")

    @classmethod
    def from_file(cls, path, vocab: Vocab, rng=None, **kw) -> "EmbeddingProvider":
        """Load vectors; the word vocabulary becomes the file's words plus ``<unk>``."""
        words, vecs = read_vectors(path)
        table = {UNK: 0}
        for w in words:
            table.setdefault(w, len(table))
        mat = np.zeros((len(table), vecs.shape[1]))
        for w, row in zip(words, vecs):
            mat[table[w]] = row
        v = Vocab(table, vocab.pos, vocab.deprels, vocab.labels)
        return cls(v, vecs.shape[1], rng, kind="precomputed", word_vectors=mat, **kw)

    @property
    def dim(self) -> int:
        return self.d_w + self.d_tag * (int(self.use_pos) + int(self.use_deprel))

    def named_parameters(self):
        if not self.freeze:
            yield "embed.word", self.word
        yield "embed.pos", self.pos
        yield "embed.deprel", self.deprel

    def named_tensors(self):
        """Every table, frozen ones included (for checkpoints)."""
        yield "embed.word", self.word
        yield "embed.pos", self.pos
        yield "embed.deprel", self.deprel


def embed_tokens(sentence: Sentence, provider: EmbeddingProvider) -> T.Tensor:
    """Rows are ``word_vec ++ pos_vec ++ deprel_vec`` for each token."""
    v = provider.vocab
    parts = [T.take_rows(provider.word, [v.word_id(t.word) for t in sentence.tokens])]
    if provider.use_pos:
        parts.append(T.take_rows(provider.pos, [v.pos_id(t.pos) for t in sentence.tokens]))
    if provider.use_deprel:
        parts.append(T.take_rows(provider.deprel, [v.deprel_id(t.deprel) for t in sentence.tokens]))
    return parts[0] if len(parts) == 1 else T.concat(parts, axis=1)
