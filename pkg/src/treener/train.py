"""Objective, learning-rate schedule, optimiser and the training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .analysis import entity_f1
from .config import TrainConfig
from .corpus import EmbeddingProvider, Sentence, Vocab, build_vocab
from .errors import NumericError
from .model import Model, variational_dropout_mask  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# schedule


def cycle_starts(epochs: int, t0: int, t_mult: int) -> list[tuple[int, int]]:
    """``(start, length)`` of each warm-restart cycle covering ``epochs``."""
    out, start, length = [], 0, t0
    while start < epochs:
        out.append((start, length))
        start += length
        length *= t_mult
    return out


def cosine_annealing_lr(epoch: int, config: TrainConfig) -> float:
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    for start, length in reversed(cycle_starts(config.epochs, config.t0, config.t_mult)):
        if epoch >= start:
            frac = (epoch - start) / length
            return config.lr_min + 0.5 * (config.lr - config.lr_min) * (1.0 + math.cos(math.pi * frac))
    raise AssertionError("unreachable")


# --------------------------------------------------------------------------
# gradients and updates


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.dot(g.ravel(), g.ravel())) for g in grads))


def clip_gradients(grads: Sequence[np.ndarray], tau: float) -> list[np.ndarray]:
    """Rescale so the joint L2 norm is at most ``tau``."""
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient")
    norm = global_norm(grads)
    if norm > tau:
        return [g * (tau / norm) for g in grads]
    return list(grads)


@dataclass
class OptimState:
    velocity: dict[str, np.ndarray] = field(default_factory=dict)
    epoch: int = 0
    lr: float = 0.0


def sgd_momentum_step(params: Sequence[tuple[str, T.Tensor]], grads: Sequence[np.ndarray],
                      state: OptimState, lr: float, momentum: float = 0.9, nesterov: bool = False) -> None:
    """``v <- mu v + g``; ``w <- w - lr v`` (or the Nesterov look-ahead form)."""
    for (name, p), g in zip(params, grads):
        v = state.velocity.get(name)
        v = g.copy() if v is None else momentum * v + g
        state.velocity[name] = v
        p.value -= lr * (g + momentum * v if nesterov else v)
    state.lr = lr


# --------------------------------------------------------------------------
# objective


def l2_penalty(model: Model) -> T.Tensor | None:
    terms = [T.square_sum(p) for _, p in model.regularized()]
    if not terms:
        return None
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


def loss_total(batch: Sequence[Sentence], model: Model, config: TrainConfig | None = None,
               rng: np.random.Generator | None = None, mode: str = "train") -> T.Tensor:
    """Mean per-sentence CRF loss plus ``l2 * sum(w^2)`` over encoder and
    attention weights."""
    if not batch:
        raise ValueError("loss_total: empty batch")
    config = config or model.config
    total = None
    for sent in batch:
        nll = model.loss(sent, mode, rng)
        total = nll if total is None else total + nll
    total = T.scale(total, 1.0 / len(batch))
    if config.l2 > 0:
        pen = l2_penalty(model)
        if pen is not None:
            total = total + T.scale(pen, config.l2)
    return total


# --------------------------------------------------------------------------
# loop


def evaluate(model: Model, corpus: Sequence[Sentence]):
    preds = [model.predict(s) for s in corpus]
    return entity_f1(corpus, preds), preds


def make_model(config: TrainConfig, vocab: Vocab) -> Model:
    rng = np.random.default_rng(config.seed)
    provider = None
    if config.embedding_file:
        provider = EmbeddingProvider.from_file(config.embedding_file, vocab, rng, freeze=config.freeze_embeddings,
                                               use_pos=config.use_pos, use_deprel=config.use_deprel)
        if provider.d_w != config.d_w:
            from .errors import ShapeError

            raise ShapeError(f"embedding file has d_w={provider.d_w}, config says d_w={config.d_w}")
    return Model(config, vocab, provider, rng)


def train(config: TrainConfig, train_corpus: Sequence[Sentence], dev_corpus: Sequence[Sentence],
          vocab: Vocab | None = None, *, target_f1: float | None = None,
          on_epoch: Callable[[dict], None] | None = None):
    """Train from scratch; returns ``(model, history)``.

    The returned model carries the parameters of the epoch with the best dev
    F1 (earliest on ties). ``target_f1`` stops training once the dev F1
    reaches it. With an empty dev corpus the last epoch is kept.
    """
    if not train_corpus:
        raise ValueError("empty training corpus")
    vocab = vocab or build_vocab(list(train_corpus) + list(dev_corpus))
    model = make_model(config, vocab)
    rng = np.random.default_rng([config.seed, 1])
    params = list(model.named_parameters())
    state = OptimState()
    history: list[dict] = []
    best_f1, best_state = -1.0, None
    order = np.arange(len(train_corpus))

    for epoch in range(config.epochs):
        lr = cosine_annealing_lr(epoch, config)
        state.epoch = epoch
        rng.shuffle(order)
        losses = []
        for b, start in enumerate(range(0, len(order), config.batch)):
            batch = [train_corpus[i] for i in order[start: start + config.batch]]
            model.zero_grad()
            loss = loss_total(batch, model, config, rng)
            if not math.isfinite(loss.item()):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
            T.backward(loss)
            try:
                grads = clip_gradients([p.grad for _, p in params], config.clip_norm)
            except NumericError as exc:
                raise NumericError(f"{exc} at epoch {epoch}, batch {b}") from None
            sgd_momentum_step(params, grads, state, lr, config.momentum, config.nesterov)
            losses.append(loss.item())
        if dev_corpus:
            report, _ = evaluate(model, dev_corpus)
            dev_f1 = report.f1
        else:
            dev_f1 = 0.0
        rec = {"epoch": epoch, "lr": lr, "train-loss": float(np.mean(losses)), "dev-f1": dev_f1}
        history.append(rec)
        log.info("epoch %d lr %.3g loss %.4f dev-f1 %.4f", epoch, lr, rec["train-loss"], dev_f1)
        if on_epoch is not None:
            on_epoch(rec)
        if dev_f1 > best_f1 or not dev_corpus:
            best_f1, best_state = dev_f1, model.state()
        if target_f1 is not None and dev_f1 >= target_f1:
            break
    if best_state is not None:
        model.load_state(best_state)
    return model, history
