"""Entity-level scoring and attention analyses (exports, hop distances,
entity/word correlations)."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import DepTree, Sentence, build_tree
from .errors import AlignmentError

NOUN_TAGS = ("NN", "NNS", "NNP", "NNPS")


# --------------------------------------------------------------------------
# entity F1


def entity_spans(labels: Sequence[str]) -> set[tuple[int, int, str]]:
    """Maximal ``B-X I-X*`` runs as ``(start, end_exclusive, type)``.

    A stray ``I-X`` (no matching predecessor) opens a new entity, as in
    conlleval.
    """
    spans = set()
    start, typ = None, None
    for i, lab in enumerate(list(labels) + ["O"]):
        if start is not None and not (lab.startswith("I-") and lab[2:] == typ):
            spans.add((start, i, typ))
            start = typ = None
        if lab.startswith("B-") or (lab.startswith("I-") and start is None):
            start, typ = i, lab[2:]
    return spans


def _prf(tp: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    true_positives: int
    predicted: int
    gold: int
    per_type: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "true-positives": self.true_positives, "predicted": self.predicted, "gold": self.gold,
            "per-type": self.per_type,
        }

    def render(self) -> str:
        rows = [("type", "precision", "recall", "f1", "gold", "pred")]
        for typ, d in sorted(self.per_type.items()):
            rows.append((typ, f"{d['precision']:.4f}", f"{d['recall']:.4f}", f"{d['f1']:.4f}",
                         str(d["gold"]), str(d["predicted"])))
        rows.append(("ALL", f"{self.precision:.4f}", f"{self.recall:.4f}", f"{self.f1:.4f}",
                     str(self.gold), str(self.predicted)))
        return render_table(rows)


def _label_seqs(corpus) -> list[list[str]]:
    return [s.labels if isinstance(s, Sentence) else list(s) for s in corpus]


def entity_f1(gold_corpus, pred_corpus) -> EvalReport:
    """Micro precision/recall/F1 over exact (span, type) matches.

    Either argument may be a list of Sentences or a list of label lists.
    """
    gold, pred = _label_seqs(gold_corpus), _label_seqs(pred_corpus)
    if len(gold) != len(pred):
        raise AlignmentError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    tp: Counter = Counter()
    n_gold: Counter = Counter()
    n_pred: Counter = Counter()
    for k, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise AlignmentError(f"sentence {k}: {len(g)} gold tokens vs {len(p)} predicted")
        gs, ps = entity_spans(g), entity_spans(p)
        for s in gs:
            n_gold[s[2]] += 1
        for s in ps:
            n_pred[s[2]] += 1
        for s in gs & ps:
            tp[s[2]] += 1
    per_type = {}
    for typ in sorted(set(n_gold) | set(n_pred)):
        p, r, f = _prf(tp[typ], n_pred[typ], n_gold[typ])
        per_type[typ] = {"precision": p, "recall": r, "f1": f, "true-positives": tp[typ],
                         "predicted": n_pred[typ], "gold": n_gold[typ]}
    total_tp, total_pred, total_gold = sum(tp.values()), sum(n_pred.values()), sum(n_gold.values())
    p, r, f = _prf(total_tp, total_pred, total_gold)
    return EvalReport(p, r, f, total_tp, total_pred, total_gold, per_type)


# --------------------------------------------------------------------------
# hop distances


def _depths(tree: DepTree) -> list[int]:
    depth = [0] * len(tree)
    for r in tree.roots:
        stack = [r]
        while stack:
            node = stack.pop()
            for c in tree.children[node]:
                depth[c] = depth[node] + 1
                stack.append(c)
    return depth


def tree_path_edges(tree: DepTree, i: int, j: int, depth: list[int] | None = None) -> int:
    """Edges on the undirected path between nodes ``i`` and ``j``.

    Nodes under different roots connect through the virtual root, which
    adds two edges between the roots.
    """
    depth = depth if depth is not None else _depths(tree)
    a, b = i, j
    da, db = depth[a], depth[b]
    steps = 0
    while da > db:
        a, da, steps = tree.parent(a), da - 1, steps + 1
    while db > da:
        b, db, steps = tree.parent(b), db - 1, steps + 1
    while a != b:
        pa, pb = tree.parent(a), tree.parent(b)
        if pa is None:  # two distinct roots
            return steps + 2
        a, b, steps = pa, pb, steps + 2
    return steps


@dataclass
class HopRecord:
    token: int
    attended: int
    seq_hops: int
    tree_hops: int


def hop_distance(sentence: Sentence, most_attended: Sequence[int] | None,
                 tree: DepTree | None = None) -> list[HopRecord]:
    """Hop counts from each gold entity token to its most attended word.

    Hops count what lies strictly between: tokens for the sequence layout,
    nodes for the tree layout. Returns an empty list when the sentence has
    a single token (no attended word exists).
    """
    if most_attended is None or len(sentence) < 2:
        return []
    tree = tree if tree is not None else build_tree(sentence)
    depth = _depths(tree)
    out = []
    for i, lab in enumerate(sentence.labels):
        if lab == "O":
            continue
        j = int(most_attended[i])
        out.append(HopRecord(i, j, abs(i - j) - 1, tree_path_edges(tree, i, j, depth) - 1))
    return out


def hop_summary(records_by_sentence: Sequence[Sequence[HopRecord]]) -> dict:
    flat = [r for rs in records_by_sentence for r in rs]
    if not flat:
        return {"entity-tokens": 0, "mean-seq-hops": None, "mean-tree-hops": None}
    return {
        "entity-tokens": len(flat),
        "mean-seq-hops": float(np.mean([r.seq_hops for r in flat])),
        "mean-tree-hops": float(np.mean([r.tree_hops for r in flat])),
    }


# --------------------------------------------------------------------------
# entity / attended-word correlations


def coarse_pos(tag: str) -> str:
    if tag.startswith("NN"):
        return "NN"
    if tag.startswith("VB"):
        return "VB"
    return "other"


def top_attended(row: np.ndarray, k: int) -> list[int]:
    """Indices of the ``k`` largest weights, ties to the lower index."""
    order = np.argsort(-row, kind="stable")
    return [int(j) for j in order[:k]]


@dataclass
class CorrelationTable:
    # entity type -> coarse POS -> {"coverage": percent, "count": n, "words": [...]}
    rows: dict[str, dict[str, dict]] = field(default_factory=dict)
    slots: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rows": self.rows, "slots": self.slots}

    def render(self) -> str:
        table = [("entity", "pos", "coverage", "words")]
        for typ in sorted(self.rows):
            groups = sorted(self.rows[typ].items(), key=lambda kv: (-kv[1]["count"], kv[0]))
            for grp, d in groups:
                table.append((typ, grp, f"{d['coverage']:.2f}%", ", ".join(d["words"])))
        return render_table(table)


def entity_correlations(corpus: Sequence[Sentence], attention: Sequence[np.ndarray | None],
                        top_k: int = 3) -> CorrelationTable:
    """Group the top-k attended words of noun entity tokens by coarse POS.

    ``attention`` holds the relative matrix ``A`` per sentence. Coverage is
    the share of attended slots (entity tokens x top-k) falling in a group.
    """
    counts: dict[str, Counter] = defaultdict(Counter)
    words: dict[str, dict[str, Counter]] = defaultdict(lambda: defaultdict(Counter))
    slots: Counter = Counter()
    for sent, A in zip(corpus, attention):
        if A is None or len(sent) < 2:
            continue
        for i, tok in enumerate(sent.tokens):
            if tok.label == "O" or tok.pos not in NOUN_TAGS:
                continue
            typ = tok.label[2:]
            for j in top_attended(A[i], min(top_k, len(sent) - 1)):
                other = sent.tokens[j]
                grp = coarse_pos(other.pos)
                counts[typ][grp] += 1
                words[typ][grp][other.word.lower()] += 1
                slots[typ] += 1
    table = CorrelationTable(slots=dict(slots))
    for typ in sorted(counts):
        table.rows[typ] = {}
        for grp, n in sorted(counts[typ].items()):
            ordered = sorted(words[typ][grp].items(), key=lambda kv: (-kv[1], kv[0]))
            table.rows[typ][grp] = {
                "coverage": 100.0 * n / slots[typ],
                "count": n,
                "words": [w for w, _ in ordered],
            }
    return table


# --------------------------------------------------------------------------
# export


def _round6(x) -> float:
    return float(f"{float(x):.6g}")


def export_attention(sentence: Sentence, A: np.ndarray | None, a: np.ndarray | None,
                     predictions: Sequence[str] | None = None) -> dict:
    """Plot-ready record; floats carry six significant digits."""
    return {
        "sid": sentence.sid,
        "tokens": sentence.words,
        "labels": sentence.labels,
        "predictions": list(predictions) if predictions is not None else None,
        "A": None if A is None else [_round6(v) for v in np.asarray(A).ravel()],
        "a": None if a is None else [_round6(v) for v in np.asarray(a)],
    }


def dumps_attention(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))


def loads_attention(line: str) -> dict:
    rec = json.loads(line)
    n = len(rec["tokens"])
    if rec.get("A") is not None:
        rec["A"] = np.asarray(rec["A"], dtype=np.float64).reshape(n, n)
    if rec.get("a") is not None:
        rec["a"] = np.asarray(rec["a"], dtype=np.float64)
    return rec


def render_table(rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(r[c])) for r in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(str(v).ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines)
