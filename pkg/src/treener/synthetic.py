"""Synthetic corpora with deterministic dependency trees.

``templated`` draws PER/LOC/ORG names from disjoint pools and slots them
into fixed sentence frames. ``syntax`` draws every name from one shared
pool, so the entity type is recoverable only from the verb that governs
the name; relative clauses with decoy verbs push that verb away from the
name in the word sequence while keeping it one edge away in the tree.
"""

from __future__ import annotations

import numpy as np

from .corpus import Sentence, Token

PER_FIRST = ["John", "Mary", "Ahmed", "Li", "Olga", "Pedro", "Fatima", "Kenji"]
PER_LAST = ["Smith", "Garcia", "Chen", "Novak", "Okafor", "Silva"]
LOC_ONE = ["Paris", "Lima", "Oslo", "Cairo", "Quito", "Hanoi", "Kenya", "Peru"]
LOC_TWO = [["New", "Delhi"], ["San", "Diego"], ["Buenos", "Aires"]]
ORG_ONE = ["Acme", "Globex", "Initech", "Hooli", "Vandelay", "Cyberdyne"]
ORG_SUFFIX = ["Corp", "Inc"]

SHARED_NAMES = ["Jordan", "Georgia", "Chelsea", "Victoria", "Florence", "Lincoln",
                "Austin", "Sydney", "Orlando", "Chester", "Madison", "Phoenix"]
VERBS = {
    "PER": ["writes", "speaks", "sings", "smiles"],
    "LOC": ["borders", "floods", "hosts", "overlooks"],
    "ORG": ["hires", "acquires", "sues", "invests"],
}
ADVERBS = ["often", "again", "today", "quietly", "rarely"]
PRONOUNS = ["they", "we", "critics", "people"]


class _Builder:
    def __init__(self):
        self.rows: list[list] = []  # word, pos, head (0-based or None), deprel, label

    def add(self, word, pos, head, deprel, label="O") -> int:
        self.rows.append([word, pos, head, deprel, label])
        return len(self.rows) - 1

    def entity(self, words, typ, pos, head, deprel) -> int:
        """Multi-word names hang off their last word; returns that word's id."""
        first = len(self.rows)
        last = first + len(words) - 1
        for k, w in enumerate(words):
            label = ("B-" if k == 0 else "I-") + typ
            if k == len(words) - 1:
                self.add(w, pos, head, deprel, label)
            else:
                self.add(w, pos, last, "compound", label)
        return last

    def set_head(self, idx, head):
        self.rows[idx][2] = head

    def build(self, sid=0) -> Sentence:
        toks = []
        for i, (w, p, h, r, lab) in enumerate(self.rows):
            toks.append(Token(i + 1, w, p, 0 if h is None else h + 1, r, lab))
        return Sentence(toks, sid)


def _pick(rng, items):
    return items[int(rng.integers(len(items)))]


def _person(rng):
    return [_pick(rng, PER_FIRST)] + ([_pick(rng, PER_LAST)] if rng.random() < 0.5 else [])


def _location(rng):
    return list(_pick(rng, LOC_TWO)) if rng.random() < 0.3 else [_pick(rng, LOC_ONE)]


def _org(rng):
    return [_pick(rng, ORG_ONE)] + ([_pick(rng, ORG_SUFFIX)] if rng.random() < 0.4 else [])


def _templated(rng, sid) -> Sentence:
    b = _Builder()
    kind = int(rng.integers(5))
    if kind == 0:  # PER met PER in LOC .
        subj = b.entity(_person(rng), "PER", "NNP", None, "nsubj")
        v = b.add("met", "VBD", None, "root")
        b.set_head(subj, v)
        b.entity(_person(rng), "PER", "NNP", v, "dobj")
        p = b.add("in", "IN", v, "prep")
        b.entity(_location(rng), "LOC", "NNP", p, "pobj")
        b.add(".", ".", v, "punct")
    elif kind == 1:  # PER works for ORG in LOC .
        subj = b.entity(_person(rng), "PER", "NNP", None, "nsubj")
        v = b.add("works", "VBZ", None, "root")
        b.set_head(subj, v)
        p = b.add("for", "IN", v, "prep")
        b.entity(_org(rng), "ORG", "NNP", p, "pobj")
        p2 = b.add("in", "IN", v, "prep")
        b.entity(_location(rng), "LOC", "NNP", p2, "pobj")
        b.add(".", ".", v, "punct")
    elif kind == 2:  # ORG opened an office in LOC .
        subj = b.entity(_org(rng), "ORG", "NNP", None, "nsubj")
        v = b.add("opened", "VBD", None, "root")
        b.set_head(subj, v)
        det = b.add("an", "DT", None, "det")
        obj = b.add("office", "NN", v, "dobj")
        b.set_head(det, obj)
        p = b.add("in", "IN", obj, "prep")
        b.entity(_location(rng), "LOC", "NNP", p, "pobj")
        b.add(".", ".", v, "punct")
    elif kind == 3:  # the president of ORG visited LOC yesterday .
        det = b.add("the", "DT", None, "det")
        subj = b.add("president", "NN", None, "nsubj")
        b.set_head(det, subj)
        p = b.add("of", "IN", subj, "prep")
        b.entity(_org(rng), "ORG", "NNP", p, "pobj")
        v = b.add("visited", "VBD", None, "root")
        b.set_head(subj, v)
        b.entity(_location(rng), "LOC", "NNP", v, "dobj")
        b.add("yesterday", "NN", v, "npadvmod")
        b.add(".", ".", v, "punct")
    else:  # PER said that ORG will move to LOC .
        subj = b.entity(_person(rng), "PER", "NNP", None, "nsubj")
        v = b.add("said", "VBD", None, "root")
        b.set_head(subj, v)
        mark = b.add("that", "IN", None, "mark")
        s2 = b.entity(_org(rng), "ORG", "NNP", None, "nsubj")
        aux = b.add("will", "MD", None, "aux")
        v2 = b.add("move", "VB", v, "ccomp")
        for i in (mark, s2, aux):
            b.set_head(i, v2)
        p = b.add("to", "TO", v2, "prep")
        b.entity(_location(rng), "LOC", "NNP", p, "pobj")
        b.add(".", ".", v, "punct")
    return b.build(sid)


def _syntax(rng, sid) -> Sentence:
    b = _Builder()
    typ = _pick(rng, sorted(VERBS))
    verb = _pick(rng, VERBS[typ])
    name = [_pick(rng, SHARED_NAMES)] + ([_pick(rng, SHARED_NAMES)] if rng.random() < 0.3 else [])
    kind = int(rng.integers(3))
    if kind == 2:  # reporters said that NAME VERB ADV .
        subj0 = b.add("reporters", "NNS", None, "nsubj")
        v0 = b.add("said", "VBD", None, "root")
        b.set_head(subj0, v0)
        mark = b.add("that", "IN", None, "mark")
        ent = b.entity(name, typ, "NNP", None, "nsubj")
        v = b.add(verb, "VBZ", v0, "ccomp")
        b.set_head(mark, v)
        b.set_head(ent, v)
        b.add(_pick(rng, ADVERBS), "RB", v, "advmod")
        b.add(".", ".", v0, "punct")
        return b.build(sid)
    ent = b.entity(name, typ, "NNP", None, "nsubj")
    if kind == 1:  # NAME , whom PRON DECOY ADV , VERB ADV .
        decoy_typ = _pick(rng, [t for t in sorted(VERBS) if t != typ])
        b.add(",", ",", ent, "punct")
        wh = b.add("whom", "WP", None, "dobj")
        pr = b.add(_pick(rng, PRONOUNS), "PRP", None, "nsubj")
        dv = b.add(_pick(rng, VERBS[decoy_typ]), "VBP", ent, "relcl")
        b.set_head(wh, dv)
        b.set_head(pr, dv)
        b.add(_pick(rng, ADVERBS), "RB", dv, "advmod")
        b.add(",", ",", ent, "punct")
    v = b.add(verb, "VBZ", None, "root")
    b.set_head(ent, v)
    b.add(_pick(rng, ADVERBS), "RB", v, "advmod")
    b.add(".", ".", v, "punct")
    return b.build(sid)


def make_corpus(n: int, seed: int = 0, kind: str = "templated") -> list[Sentence]:
    """``n`` sentences; identical arguments give identical corpora."""
    gen = {"templated": _templated, "syntax": _syntax}.get(kind)
    if gen is None:
        raise ValueError(f"unknown synthetic corpus kind {kind!r}")
    rng = np.random.default_rng(seed)
    return [gen(rng, i) for i in range(n)]
