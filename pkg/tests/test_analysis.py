from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treener.analysis import (entity_correlations, entity_f1, entity_spans, export_attention, dumps_attention,
                              hop_distance, hop_summary, loads_attention, tree_path_edges)
from treener.corpus import Sentence, Token, build_tree
from treener.errors import AlignmentError

labels = st.lists(st.sampled_from(["O", "B-PER", "I-PER", "B-LOC", "I-LOC"]), min_size=1, max_size=12)


def test_identical_sequences():
    gold = [["B-PER", "I-PER", "O", "B-LOC"]]
    r = entity_f1(gold, gold)
    assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)


def test_all_outside_prediction():
    r = entity_f1([["B-PER", "O"]], [["O", "O"]])
    assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)


def test_half_overlap():
    r = entity_f1([["B-PER", "O", "B-LOC"]], [["B-PER", "O", "B-ORG"]])
    assert r.precision == 0.5 and r.recall == 0.5 and r.f1 == 0.5


def test_boundary_mismatch_is_a_miss():
    r = entity_f1([["B-PER", "I-PER"]], [["B-PER", "O"]])
    assert r.f1 == 0.0


def test_stray_inside_tag_opens_an_entity():
    assert entity_spans(["O", "I-PER", "I-PER", "B-LOC", "I-PER"]) == {(1, 3, "PER"), (3, 4, "LOC"), (4, 5, "PER")}


def test_alignment_errors():
    with pytest.raises(AlignmentError):
        entity_f1([["O"]], [["O"], ["O"]])
    with pytest.raises(AlignmentError):
        entity_f1([["O", "O"]], [["O"]])


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_swapping_gold_and_prediction_swaps_precision_and_recall(data):
    g = data.draw(labels)
    p = data.draw(st.lists(st.sampled_from(["O", "B-PER", "I-PER", "B-LOC", "I-LOC"]),
                           min_size=len(g), max_size=len(g)))
    a, b = entity_f1([g], [p]), entity_f1([p], [g])
    assert a.precision == b.recall and a.recall == b.precision and a.f1 == b.f1
    assert 0.0 <= a.f1 <= 1.0


def test_per_type_counts():
    r = entity_f1([["B-PER", "B-LOC", "O"]], [["B-PER", "O", "B-LOC"]])
    assert r.per_type["PER"]["f1"] == 1.0 and r.per_type["LOC"]["f1"] == 0.0
    assert "ALL" in r.render()


# -- hops --------------------------------------------------------------------

def sent_of(heads, labels):
    return Sentence([Token(i + 1, f"w{i}", "NN", h, "dep", lab) for i, (h, lab) in enumerate(zip(heads, labels))])


def test_adjacent_words():
    (rec,) = hop_distance(sent_of([0, 1], ["B-PER", "O"]), [1, 0])
    assert (rec.seq_hops, rec.tree_hops) == (0, 0)


def test_chain_three_apart():
    heads = [0, 1, 2, 3, 4]
    (rec,) = hop_distance(sent_of(heads, ["B-PER", "O", "O", "O", "O"]), [3, 0, 0, 0, 0])
    assert (rec.seq_hops, rec.tree_hops) == (2, 2)


def test_star_tree_through_the_hub():
    heads = [0, 1, 1, 1, 1, 1]
    (rec,) = hop_distance(sent_of(heads, ["O", "B-PER", "O", "O", "O", "O"]), [0, 5, 0, 0, 0, 0])
    assert rec.tree_hops == 1 and rec.seq_hops == 3


def test_single_token_is_skipped():
    assert hop_distance(sent_of([0], ["B-PER"]), None) == []
    assert hop_summary([[]])["entity-tokens"] == 0


def bfs_edges(heads, i, j):
    """Shortest path in the undirected graph including a virtual root node 0."""
    n = len(heads)
    adj = {v: [] for v in range(n + 1)}
    for k, h in enumerate(heads, start=1):
        adj[k].append(h)
        adj[h].append(k)
    dist = {i + 1: 0}
    queue = deque([i + 1])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist[j + 1]


def random_heads(rng, n):
    order = rng.permutation(n)
    n_roots = int(rng.integers(1, min(3, n) + 1))
    heads = [0] * n
    for k, node in enumerate(order):
        if k >= n_roots:
            heads[node] = int(order[rng.integers(k)]) + 1
    return heads


def test_tree_paths_match_breadth_first_search():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 41))
        heads = random_heads(rng, n)
        tree = build_tree(heads)
        i, j = (int(v) for v in rng.integers(n, size=2))
        assert tree_path_edges(tree, i, j) == bfs_edges(heads, i, j)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30))
def test_chain_tree_hops_equal_sequence_hops(n):
    tree = build_tree([0] + list(range(1, n)))
    for i in range(n):
        for j in range(n):
            if i != j:
                assert tree_path_edges(tree, i, j) - 1 == abs(i - j) - 1


# -- correlations --------------------------------------------------------------

def test_empty_corpus_gives_empty_table():
    table = entity_correlations([], [])
    assert table.rows == {} and table.slots == {}


def test_three_distinct_words_share_coverage():
    sent = Sentence([Token(1, "say", "VBP", 0, "root"), Token(2, "Obama", "NNP", 1, "nsubj", "B-PER"),
                     Token(3, "president", "NN", 2, "appos"), Token(4, "of", "IN", 3, "prep")])
    A = np.zeros((4, 4))
    A[1] = [0.5, 0.0, 0.3, 0.2]
    table = entity_correlations([sent], [A], top_k=3)
    per = table.rows["PER"]
    assert table.slots["PER"] == 3
    for grp in ("VB", "NN", "other"):
        assert per[grp]["coverage"] == pytest.approx(100 / 3)
    assert per["VB"]["words"] == ["say"]
    assert "33.33%" in table.render()


def test_dominant_verb_ranks_first():
    sents, mats = [], []
    for k in range(5):
        verb = "speaks" if k < 4 else "writes"
        s = Sentence([Token(1, "Jordan", "NNP", 2, "nsubj", "B-PER"), Token(2, verb, "VBZ", 0, "root"),
                      Token(3, ".", ".", 2, "punct")])
        sents.append(s)
        mats.append(np.array([[0, 0.9, 0.1], [0.5, 0, 0.5], [0.5, 0.5, 0]]))
    table = entity_correlations(sents, mats, top_k=1)
    assert table.rows["PER"]["VB"]["words"] == ["speaks", "writes"]
    assert table.rows["PER"]["VB"]["coverage"] == 100.0


def test_non_noun_entity_tokens_are_skipped():
    s = Sentence([Token(1, "big", "JJ", 2, "amod", "B-ORG"), Token(2, "x", "VBZ", 0, "root")])
    assert entity_correlations([s], [np.array([[0, 1.0], [1.0, 0]])]).rows == {}


# -- export --------------------------------------------------------------------

def test_export_two_words():
    s = sent_of([0, 1], ["B-PER", "O"])
    rec = export_attention(s, np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.25, 0.75]), ["B-PER", "O"])
    assert rec["A"] == [0.0, 1.0, 1.0, 0.0]
    back = loads_attention(dumps_attention(rec))
    np.testing.assert_array_equal(back["A"], [[0, 1], [1, 0]])
    assert back["tokens"] == s.words and back["predictions"] == ["B-PER", "O"]


def test_export_round_trip_six_digits():
    rng = np.random.default_rng(0)
    n = 6
    A = rng.random((n, n))
    np.fill_diagonal(A, 0)
    A /= A.sum(axis=1, keepdims=True)
    a = rng.random(n)
    a /= a.sum()
    s = sent_of([0] + list(range(1, n)), ["O"] * n)
    back = loads_attention(dumps_attention(export_attention(s, A, a)))
    np.testing.assert_allclose(back["A"], A, rtol=1e-5)
    assert abs(back["a"].sum() - 1) < 1e-5
