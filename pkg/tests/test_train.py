import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treener import tensor as T
from treener.checkpoint import load_model, save_model
from treener.config import TrainConfig
from treener.corpus import build_vocab
from treener.errors import CheckpointError, ConfigError, NumericError
from treener.model import Model, variational_dropout_mask
from treener.synthetic import make_corpus
from treener.train import (OptimState, clip_gradients, cosine_annealing_lr, cycle_starts, evaluate,
                           global_norm, l2_penalty, loss_total, sgd_momentum_step, train)

TINY = dict(d_w=8, d_h=3, depth=2)


def tiny_model(**kw):
    corpus = make_corpus(4, seed=0)
    cfg = TrainConfig(**{**TINY, **kw})
    return Model(cfg, build_vocab(corpus)), corpus


# -- schedule ------------------------------------------------------------------

def test_cycles_cover_150_epochs():
    assert cycle_starts(150, 10, 2) == [(0, 10), (10, 20), (30, 40), (70, 80)]


def test_schedule_values():
    cfg = TrainConfig()
    for e in (0, 10, 30, 70):
        assert cosine_annealing_lr(e, cfg) == 5e-3
    assert abs(cosine_annealing_lr(5, cfg) - 2.5e-3) < 1e-12
    assert cosine_annealing_lr(9, cfg) < cosine_annealing_lr(8, cfg)
    with pytest.raises(ValueError):
        cosine_annealing_lr(150, cfg)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 149))
def test_schedule_bounds(epoch):
    lr = cosine_annealing_lr(epoch, TrainConfig())
    assert 0.0 <= lr <= 5e-3


# -- clipping and updates --------------------------------------------------------

def test_clipping_rescales_to_threshold():
    grads = [np.array([6.0, 8.0])]  # norm 10
    clipped = clip_gradients(grads, 5.0)
    np.testing.assert_allclose(clipped[0], [3.0, 4.0], atol=1e-15)


def test_clipping_leaves_small_gradients_alone():
    grads = [np.array([0.3, 0.4]), np.array([[1.0]])]
    out = clip_gradients(grads, 5.0)
    assert all(a is b or np.array_equal(a, b) for a, b in zip(out, grads))


@settings(max_examples=50, deadline=None)
@given(st.floats(6, 100), st.integers(0, 2**32 - 1))
def test_clipping_invariant(norm, seed):
    rng = np.random.default_rng(seed)
    grads = [rng.normal(size=(3, 4)), rng.normal(size=5)]
    scale = norm / global_norm(grads)
    grads = [g * scale for g in grads]
    out = clip_gradients(grads, 5.0)
    assert abs(global_norm(out) - 5.0) < 1e-9


def test_clipping_rejects_non_finite():
    with pytest.raises(NumericError):
        clip_gradients([np.array([np.nan])], 5.0)


def test_momentum_two_steps():
    p = T.parameter(np.zeros(2))
    g = np.array([1.0, -2.0])
    state = OptimState()
    sgd_momentum_step([("w", p)], [g], state, 0.1, 0.9)
    np.testing.assert_allclose(p.value, -0.1 * g)
    sgd_momentum_step([("w", p)], [g], state, 0.1, 0.9)
    np.testing.assert_allclose(p.value, -0.1 * g * 2.9, atol=1e-15)


def descend_bowl(nesterov, steps=100):
    p = T.parameter(np.array([0.6, 0.8]))
    state = OptimState()
    for _ in range(steps):
        sgd_momentum_step([("w", p)], [2 * p.value], state, 0.1, 0.9, nesterov)
    return float(np.linalg.norm(p.value))


@pytest.mark.xfail(strict=True, reason="heavy-ball contraction is sqrt(0.9) per step: |w| ~ 2.9e-3 after 100 steps")
def test_classical_momentum_bowl_within_100_steps():
    assert descend_bowl(nesterov=False) < 1e-3


def test_momentum_descends_quadratic_bowl():
    assert descend_bowl(nesterov=False) < 3e-3
    assert descend_bowl(nesterov=False, steps=150) < 1e-3
    assert descend_bowl(nesterov=True) < 1e-3


# -- dropout -------------------------------------------------------------------

def test_dropout_zero_rate_is_identity():
    np.testing.assert_array_equal(variational_dropout_mask(7, 0.0, np.random.default_rng(0)), np.ones(7))
    np.testing.assert_array_equal(variational_dropout_mask(7, 0.3, None, train=False), np.ones(7))


def test_dropout_mask_is_unbiased():
    m = variational_dropout_mask(100_000, 0.3, np.random.default_rng(0))
    assert abs(m.mean() - 1.0) < 0.01
    assert set(np.unique(m)) <= {0.0, 1 / 0.7}


def test_dropout_mask_shared_across_tokens():
    model, corpus = tiny_model(dropout=0.5, use_relative=False, use_global=False, use_tree=False)
    from treener.model import VariationalDropout

    x = T.constant(np.ones((5, 4)))
    out = VariationalDropout(0.5, np.random.default_rng(3))(x).value
    assert np.all(out == out[0])


# -- objective -----------------------------------------------------------------

def test_l2_term_is_exactly_lambda_sum_of_squares():
    model, corpus = tiny_model(dropout=0.0)
    base = loss_total(corpus, model.__class__(model.config.replace(l2=0.0), model.vocab, model.provider,
                                              np.random.default_rng(0)), mode="eval")
    rebuilt = Model(model.config.replace(l2=0.0), model.vocab, model.provider, np.random.default_rng(0))
    with_l2 = Model(model.config.replace(l2=1e-3), model.vocab, model.provider, np.random.default_rng(0))
    a = loss_total(corpus, rebuilt, mode="eval").item()
    b = loss_total(corpus, with_l2, mode="eval").item()
    expected = 1e-3 * sum(float(np.sum(p.value ** 2)) for _, p in with_l2.regularized())
    assert base.item() == a
    assert abs((b - a) - expected) < 1e-12


def test_l2_covers_encoders_and_attention_only():
    model, _ = tiny_model()
    names = [n for n, _ in model.regularized()]
    assert names and all(n.split(".")[0] in ("tree", "bilstm", "rel", "glob") for n in names)
    all_names = [n for n, _ in model.named_parameters()]
    assert any(n.startswith("embed.") for n in all_names) and any(n.startswith("crf.") for n in all_names)
    assert l2_penalty(model).item() > 0


def test_eval_is_deterministic():
    model, corpus = tiny_model()
    a, _ = model.forward(corpus[0])
    b, _ = model.forward(corpus[0])
    np.testing.assert_array_equal(a.value, b.value)


def test_train_mode_without_rng_is_an_error():
    model, corpus = tiny_model()
    with pytest.raises(ValueError):
        model.forward(corpus[0], "train")


@pytest.mark.parametrize("flags", [
    dict(use_tree=False),
    dict(use_blstm=False),
    dict(use_relative=False, use_global=False),
    dict(use_tree=False, use_pos=False, use_deprel=False),
    dict(residual=False),
    dict(attention_order="parallel"),
])
def test_ablations_keep_emission_shape(flags):
    model, corpus = tiny_model(**flags)
    E, _ = model.forward(corpus[1])
    assert E.shape == (len(corpus[1]), len(model.labels))


def test_ablation_widths():
    assert tiny_model()[0].d_a == 9
    assert tiny_model(use_tree=False)[0].d_a == 6
    assert tiny_model(use_blstm=False)[0].d_a == 3


def probe_model(seed):
    """Smallest full model (depth 2, all components) at a random point in [-1, 1]."""
    sent = min(make_corpus(20, seed=seed), key=len)
    model = Model(TrainConfig(d_w=4, d_h=2, depth=2, l2=1e-2, seed=seed), build_vocab([sent]))
    rng = np.random.default_rng(seed)
    for _, p in model.named_parameters():
        p.value[...] = rng.uniform(-1, 1, p.shape)
    return model, sent


@pytest.mark.parametrize("seed", range(2))
def test_full_model_gradients(seed):
    model, sent = probe_model(seed)
    for name, p in model.named_parameters():
        assert T.grad_check(lambda _: loss_total([sent], model, mode="eval"), p) < 1e-4, name


# -- loop ----------------------------------------------------------------------

def test_one_epoch_history():
    corpus = make_corpus(6, seed=1)
    _, hist = train(TrainConfig(**TINY, epochs=1), corpus, corpus)
    assert len(hist) == 1 and set(hist[0]) == {"epoch", "lr", "train-loss", "dev-f1"}
    assert hist[0]["lr"] == 5e-3


def test_one_epoch_on_all_outside_corpus():
    corpus = [s.with_labels(["O"] * len(s)) for s in make_corpus(4, seed=1)]
    _, hist = train(TrainConfig(**TINY, epochs=1), corpus, corpus)
    assert len(hist) == 1 and hist[0]["dev-f1"] == 0.0


def test_same_seed_same_history():
    corpus = make_corpus(6, seed=2)
    cfg = TrainConfig(**TINY, epochs=3)
    _, h1 = train(cfg, corpus, corpus)
    _, h2 = train(cfg, corpus, corpus)
    assert json.dumps(h1) == json.dumps(h2)
    _, h3 = train(cfg.replace(seed=5), corpus, corpus)
    assert h3 != h1


def test_best_epoch_parameters_are_restored():
    corpus = make_corpus(8, seed=3)
    model, hist = train(TrainConfig(**TINY, epochs=4), corpus, corpus)
    report, _ = evaluate(model, corpus)
    assert report.f1 == max(h["dev-f1"] for h in hist)


def test_target_f1_stops_early():
    corpus = make_corpus(4, seed=4)
    _, hist = train(TrainConfig(**TINY, epochs=5), corpus, corpus, target_f1=0.0)
    assert len(hist) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_loss_is_reported():
    corpus = make_corpus(4, seed=5)
    with pytest.raises(NumericError, match="epoch"):
        train(TrainConfig(**TINY, epochs=3, lr=1e308, clip_norm=1e308), corpus, corpus)


# -- checkpoints and config ------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    model, corpus = tiny_model()
    save_model(tmp_path / "m", model)
    back = load_model(tmp_path / "m")
    for (n1, t1), (n2, t2) in zip(model.named_tensors(), back.named_tensors()):
        assert n1 == n2
        np.testing.assert_array_equal(t1.value, t2.value)
    assert back.predict(corpus[0]) == model.predict(corpus[0])
    first = (tmp_path / "m.bin").read_bytes()
    save_model(tmp_path / "m", back)
    assert (tmp_path / "m.bin").read_bytes() == first


def test_corrupted_checkpoint(tmp_path):
    model, _ = tiny_model()
    save_model(tmp_path / "m", model)
    blob = bytearray((tmp_path / "m.bin").read_bytes())
    blob[10] ^= 0xFF
    (tmp_path / "m.bin").write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="manifest mismatch"):
        load_model(tmp_path / "m")
    with pytest.raises(CheckpointError):
        load_model(tmp_path / "missing")


def test_config_round_trip_and_errors(tmp_path):
    cfg = TrainConfig(d_h=7, use_tree=False)
    assert TrainConfig.from_dict(json.loads(cfg.dumps())) == cfg
    with pytest.raises(ConfigError, match="bogus"):
        TrainConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="clip-norm"):
        TrainConfig(clip_norm=-1.0)
    with pytest.raises(ConfigError, match="nope.json"):
        TrainConfig.load(tmp_path / "nope.json")
    assert TrainConfig.from_dict({"lr": 1}).lr == 1.0
