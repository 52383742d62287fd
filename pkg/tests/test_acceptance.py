"""Acceptance gate: one test per criterion, each at its stated tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import itertools
import json
import time
from collections import deque

import numpy as np

from conftest import criterion
from treener import tensor as T
from treener.analysis import tree_path_edges
from treener.attention import GlobalAttentionParams, RelativeAttentionParams, global_attention, relative_attention
from treener.cli import main
from treener.config import TrainConfig
from treener.corpus import build_tree, build_vocab, format_conll
from treener.crf import CrfParams, crf_nll, path_score, viterbi_decode
from treener.encoders import EncoderStack, LstmParams, tree_lstm_forward
from treener.experiments import ablation, overfit
from treener.model import Model
from treener.synthetic import make_corpus
from treener.train import clip_gradients, cosine_annealing_lr, cycle_starts, global_norm, loss_total

SEEDS = range(5)


def uniform(rng, *shape):
    return rng.uniform(-1, 1, size=shape)


def randomize(params, rng):
    for _, p in params:
        p.value[...] = uniform(rng, *p.shape)


def worst_error(f, tensors):
    return max(T.grad_check(f, t, 1e-5) for t in tensors)


@criterion(1, "gradient suite, max relative error < 1e-4 over 5 seeds, < 60 s")
def test_gradient_suite():
    start = time.perf_counter()
    worst = {}
    for seed in SEEDS:
        rng = np.random.default_rng(seed)

        cell = LstmParams.init(3, 4, rng)
        randomize(cell.named_parameters(), rng)
        X = T.parameter(uniform(rng, 6, 3))
        tree = build_tree([0, 1, 1, 2, 2, 3])
        w = T.constant(uniform(rng, 6, 4))
        worst["tree-lstm"] = max(worst.get("tree-lstm", 0), worst_error(
            lambda _: T.sum(tree_lstm_forward(tree, X, cell)[0] * w), [X, cell.W, cell.U, cell.b]))

        rel = RelativeAttentionParams.init(4, rng)
        randomize(rel.named_parameters(), rng)
        H = T.parameter(uniform(rng, 5, 4))
        w = T.constant(uniform(rng, 5, 4))
        worst["relative"] = max(worst.get("relative", 0), worst_error(
            lambda _: T.sum(relative_attention(H, rel)[0] * w), [H, rel.W_Q, rel.W_K, rel.W_V]))

        glob = GlobalAttentionParams.init(4, 3, 5, rng)
        randomize(glob.named_parameters(), rng)
        q = T.parameter(uniform(rng, 3))
        worst["global"] = max(worst.get("global", 0), worst_error(
            lambda _: T.sum(global_attention(H, q, glob)[0] * w), [H, q, *(p for _, p in glob.named_parameters())]))

        gain, bias = T.parameter(uniform(rng, 4)), T.parameter(uniform(rng, 4))
        worst["layer-norm"] = max(worst.get("layer-norm", 0), worst_error(
            lambda _: T.sum(T.layer_norm(H, gain, bias) * w), [H, gain, bias]))

        crf = CrfParams.init(3, 4, rng)
        randomize(crf.named_parameters(), rng)
        E = T.parameter(uniform(rng, 5, 4))
        gold = list(rng.integers(4, size=5))
        worst["crf"] = max(worst.get("crf", 0), worst_error(
            lambda _: crf_nll(E, crf, gold), [E, crf.transitions, crf.start, crf.stop]))

        sent = min(make_corpus(20, seed=seed), key=len)
        model = Model(TrainConfig(d_w=4, d_h=2, depth=2, l2=1e-2, seed=seed), build_vocab([sent]))
        randomize(model.named_parameters(), rng)
        worst["full-model"] = max(worst.get("full-model", 0), worst_error(
            lambda _: loss_total([sent], model, mode="eval"), model.parameters()))

    elapsed = time.perf_counter() - start
    summary = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert max(worst.values()) < 1e-4, summary
    assert elapsed < 60, f"{elapsed:.1f}s"
    return f"{summary}; {elapsed:.1f}s"


def enumerate_paths(E, crf):
    N, L = E.shape
    tr, st, sp = crf.transitions.value, crf.start.value, crf.stop.value
    best, best_score, scores = None, -np.inf, []
    for y in itertools.product(range(L), repeat=N):
        s = path_score(E, tr, st, sp, y)
        scores.append(s)
        if s > best_score:  # strict: the lexicographically first path wins ties
            best, best_score = list(y), s
    scores = np.array(scores)
    m = scores.max()
    return m + np.log(np.exp(scores - m).sum()), best


@criterion(2, "CRF log Z within 1e-10 and exact Viterbi on 100 instances (N<=5, L<=4)")
def test_crf_oracle():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        n, L = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        crf = CrfParams.init(2, L, rng)
        for t in (crf.transitions, crf.start, crf.stop):
            t.value[...] = rng.normal(size=t.shape)
        E = rng.normal(size=(n, L))
        log_z, best = enumerate_paths(E, crf)
        gold = list(rng.integers(L, size=n))
        gold_score = path_score(E, crf.transitions.value, crf.start.value, crf.stop.value, gold)
        got = crf_nll(T.constant(E), crf, gold).item() * n + gold_score
        worst = max(worst, abs(got - log_z))
        assert abs(got - log_z) < 1e-10
        assert viterbi_decode(E, crf)[0] == best
    return f"max |dlogZ| {worst:.1e}"


def reversed_lstm(X, params):
    """Plain numpy LSTM run from the last token to the first."""
    sig = lambda z: 1 / (1 + np.exp(-z))  # noqa: E731
    W, U, b = params.W.value, params.U.value, params.b.value
    d = params.d_h
    h, c = np.zeros(d), np.zeros(d)
    out = np.zeros((len(X), d))
    for t in range(len(X) - 1, -1, -1):
        z = X[t] @ W + h @ U + b
        i, o, u, f = sig(z[:d]), sig(z[d:2 * d]), np.tanh(z[2 * d:3 * d]), sig(z[3 * d:])
        c = i * u + f * c
        h = o * np.tanh(c)
        out[t] = h
    return out


@criterion(3, "Tree-LSTM on chains equals a reversed LSTM within 1e-10 (50 cases)")
def test_chain_equivalence():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        n, d_in, d_h = int(rng.integers(1, 15)), int(rng.integers(1, 6)), int(rng.integers(1, 6))
        params = LstmParams.init(d_in, d_h, rng)
        randomize(params.named_parameters(), rng)
        X = rng.normal(size=(n, d_in))
        H, _ = tree_lstm_forward(build_tree([0] + list(range(1, n))), T.constant(X), params)
        worst = max(worst, float(np.abs(H.value - reversed_lstm(X, params)).max()))
    assert worst < 1e-10
    return f"max diff {worst:.1e}"


@criterion(4, "attention normalisation: zero diagonal, rows 1 +- 1e-10, mass N +- 1e-9, global 1 +- 1e-12")
def test_attention_normalisation():
    rng = np.random.default_rng(4)
    for n in range(2, 11):
        for _ in range(10):
            d = int(rng.integers(2, 9))
            rel = RelativeAttentionParams.init(d, rng)
            randomize(rel.named_parameters(), rng)
            H = T.constant(rng.normal(scale=3.0, size=(n, d)))
            _, A = relative_attention(H, rel)
            assert np.all(np.diag(A.value) == 0.0)
            assert np.all(np.abs(A.value.sum(axis=1) - 1) <= 1e-10)
            assert abs(A.value.sum() - n) <= 1e-9
            glob = GlobalAttentionParams.init(d, 3, 4, rng)
            randomize(glob.named_parameters(), rng)
            _, a = global_attention(H, T.constant(rng.normal(size=3)), glob)
            assert abs(a.value.sum() - 1) <= 1e-12


@criterion(5, "warm-restart schedule: cycles 10/20/40/80, restarts at 5e-3, lr(5) = 2.5e-3")
def test_schedule():
    cfg = TrainConfig()
    lengths = [length for _, length in cycle_starts(cfg.epochs, cfg.t0, cfg.t_mult)]
    assert lengths == [10, 20, 40, 80] and sum(lengths) == 150
    for epoch in (0, 10, 30, 70):
        assert cosine_annealing_lr(epoch, cfg) == 5e-3
    assert abs(cosine_annealing_lr(5, cfg) - 2.5e-3) <= 1e-12


@criterion(6, "clipping: post-clip norm 5 +- 1e-9, cosine 1 +- 1e-12")
def test_clipping():
    rng = np.random.default_rng(6)
    for _ in range(200):
        grads = [rng.normal(size=s) for s in [(3, 4), (7,), (2, 2, 2)]]
        target = rng.uniform(6, 100)
        scale = target / global_norm(grads)
        grads = [g * scale for g in grads]
        clipped = clip_gradients(grads, 5.0)
        assert abs(global_norm(clipped) - 5.0) <= 1e-9
        a = np.concatenate([g.ravel() for g in grads])
        b = np.concatenate([g.ravel() for g in clipped])
        assert abs(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)) - 1) <= 1e-12


@criterion(7, "overfit 50 templated sentences to F1 = 100% within 150 epochs, < 10 min")
def test_overfit():
    # default recipe (lr 5e-3, momentum 0.9, dropout 0.3, l2 1e-5, ...) with a 32-dim word table
    result = overfit(50, seed=0, config=TrainConfig(d_w=32))
    assert result.epochs_run <= 150
    assert result.f1 == 1.0, f"F1 {result.f1:.4f} after {result.epochs_run} epochs"
    assert result.seconds < 600
    return f"F1 1.0 at epoch {result.epochs_run - 1}, {result.seconds:.0f}s"


@criterion(8, "ablation on 500 verb-typed sentences: tree model dev F1 >= word-only BiLSTM")
def test_ablation():
    result = ablation(500, seed=0)
    detail = f"full {result.full_f1:.4f} vs word-only BiLSTM {result.baseline_f1:.4f}, {result.seconds:.0f}s"
    print(detail)
    assert result.full_f1 >= result.baseline_f1, detail
    return detail


def bfs_hops(heads, i, j):
    adj = {v: [] for v in range(len(heads) + 1)}
    for k, h in enumerate(heads, start=1):
        adj[k].append(h)
        adj[h].append(k)
    dist, queue = {i + 1: 0}, deque([i + 1])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist[j + 1]


@criterion(9, "tree paths agree with BFS on 1000 random trees; chain tree-hops = seq-hops")
def test_hop_oracle():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        n = int(rng.integers(1, 41))
        order = rng.permutation(n)
        n_roots = int(rng.integers(1, min(3, n) + 1))
        heads = [0] * n
        for k, node in enumerate(order):
            if k >= n_roots:
                heads[node] = int(order[rng.integers(k)]) + 1
        tree = build_tree(heads)
        for _ in range(5):
            i, j = (int(v) for v in rng.integers(n, size=2))
            assert tree_path_edges(tree, i, j) == bfs_hops(heads, i, j)
    for n in range(2, 25):
        chain = build_tree([0] + list(range(1, n)))
        for i in range(n):
            for j in range(n):
                if i != j:
                    assert tree_path_edges(chain, i, j) - 1 == abs(i - j) - 1


@criterion(10, "two train runs with the same seed give byte-identical history and checkpoint")
def test_determinism(tmp_path):
    corpus = tmp_path / "train.tsv"
    corpus.write_text(format_conll(make_corpus(20, seed=10)))
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"d-w": 16, "d-h": 4, "epochs": 3}))
    for run in ("a", "b"):
        code = main(["train", "--config", str(config), "--train", str(corpus), "--dev", str(corpus),
                     "--out", str(tmp_path / run), "--seed", "7"])
        assert code == 0
    for name in ("history.jsonl", "model.json", "model.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
