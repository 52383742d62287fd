"""Scaled-down experiment drivers shared by scripts/ and the acceptance suite."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .analysis import entity_f1
from .config import TrainConfig
from .corpus import build_vocab
from .synthetic import make_corpus
from .train import evaluate, train

# word-only BiLSTM-CRF: no tree encoder, no tag embeddings, no attention
BASELINE_FLAGS = dict(use_tree=False, use_pos=False, use_deprel=False, use_relative=False, use_global=False)


@dataclass
class OverfitResult:
    f1: float
    epochs_run: int
    seconds: float
    history: list


def overfit(n: int = 50, seed: int = 0, config: TrainConfig | None = None) -> OverfitResult:
    """Train on a templated corpus and score on the same sentences."""
    corpus = make_corpus(n, seed=seed)
    config = config or TrainConfig(d_w=32)
    start = time.perf_counter()
    model, history = train(config, corpus, corpus, target_f1=1.0)
    f1 = entity_f1(corpus, [model.predict(s) for s in corpus]).f1
    return OverfitResult(f1, len(history), time.perf_counter() - start, history)


@dataclass
class AblationResult:
    full_f1: float
    baseline_f1: float
    seconds: float


def ablation(n: int = 500, seed: int = 0, dev_fraction: float = 0.2,
             config: TrainConfig | None = None) -> AblationResult:
    """Full model vs the word-only BiLSTM on the verb-typed corpus.

    Both runs share the split, vocabulary, seed and optimiser settings;
    only the component switches differ.
    """
    corpus = make_corpus(n, seed=seed, kind="syntax")
    n_dev = int(round(n * dev_fraction))
    train_set, dev_set = corpus[n_dev:], corpus[:n_dev]
    vocab = build_vocab(corpus)
    config = config or TrainConfig(d_w=16, d_h=8, epochs=70, lr=0.05)
    start = time.perf_counter()
    scores = []
    for cfg in (config, config.replace(**BASELINE_FLAGS)):
        model, _ = train(cfg, train_set, dev_set, vocab)
        scores.append(evaluate(model, dev_set)[0].f1)
    return AblationResult(scores[0], scores[1], time.perf_counter() - start)
