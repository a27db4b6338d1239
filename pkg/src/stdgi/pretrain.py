"""Unsupervised joint training of the encoder and the per-horizon discriminators."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .encoder import EncoderParams, encode
from .errors import ConfigError, DivergenceError
from .mi import DiscriminatorParams, corrupt_batch, discriminate, infomax_loss, pair_accuracy
from .numerics import Adam, LrSchedule, Tape, lr_at_epoch, mean, stack
from .params import tensors

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 100
    batch_size: int = 64
    base_lr: float = 1e-3
    warm_epochs: int = 20
    period: int = 30
    factor: float = 0.1
    milestones: tuple[int, ...] | None = None
    ks: tuple[int, ...] = (1, 3, 6)
    hidden: int = 64
    embed_dim: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("pretrain epochs and batch_size must be >= 1")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ConfigError(f"ks must be non-empty positive horizons, got {self.ks}")

    @property
    def schedule(self) -> LrSchedule:
        return LrSchedule(self.base_lr, self.warm_epochs, self.period, self.factor, self.milestones)


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    initial_loss: float = math.nan
    initial_accuracy: float = math.nan

    def to_jsonl(self) -> str:
        return "".join(json.dumps({"epoch": i, "loss": l, "accuracy": a, "lr": r}) + "\n"
                       for i, (l, a, r) in enumerate(zip(self.loss, self.accuracy, self.lr)))


@dataclass
class StdgiModel:
    encoder: EncoderParams
    discriminators: list[DiscriminatorParams]

    @classmethod
    def init(cls, rng: np.random.Generator, feat_dim: int, config: PretrainConfig) -> "StdgiModel":
        enc = EncoderParams.init(rng, feat_dim, config.hidden, config.embed_dim)
        discs = [DiscriminatorParams.init(rng, config.embed_dim, feat_dim, k=k) for k in config.ks]
        return cls(enc, discs)

    def parameters(self) -> list:
        return tensors(self.encoder) + [t for d in self.discriminators for t in tensors(d)]


def valid_time_steps(time_range: tuple[int, int], ks) -> np.ndarray:
    """Anchor steps ``t`` with ``t + max(ks)`` still inside ``time_range``."""
    a, b = time_range
    return np.arange(a, max(a, b - max(ks)))


def batch_loss(values: np.ndarray, a_hat: np.ndarray, model: StdgiModel, ts: np.ndarray,
               rng: np.random.Generator):
    """Mean InfoMax loss over horizons for anchor steps ``ts``; also returns scores."""
    h = encode(values[ts], a_hat, model.encoder)
    losses, scores = [], []
    for disc in model.discriminators:
        fut = values[ts + disc.k]
        neg = corrupt_batch(fut, rng)
        pos_s = discriminate(h, fut, disc)
        neg_s = discriminate(h, neg, disc)
        losses.append(infomax_loss(pos_s, neg_s))
        scores.append((pos_s.data, neg_s.data))
    return mean(stack(losses)), scores


def evaluate_pairs(values, a_hat, model: StdgiModel, ts: np.ndarray, seed: int,
                   chunk: int = 256) -> tuple[float, float]:
    """Loss and balanced accuracy on a fixed pair set (corruption seeded by ``seed``)."""
    rng = np.random.default_rng(seed)
    total, accs = 0.0, []
    pos_all = [[] for _ in model.discriminators]
    neg_all = [[] for _ in model.discriminators]
    for i in range(0, len(ts), chunk):
        part = ts[i:i + chunk]
        loss, scores = batch_loss(values, a_hat, model, part, rng)
        total += loss.item() * len(part)
        for j, (p, n) in enumerate(scores):
            pos_all[j].append(p.ravel())
            neg_all[j].append(n.ravel())
    for p, n in zip(pos_all, neg_all):
        accs.append(pair_accuracy(np.concatenate(p), np.concatenate(n)))
    return total / len(ts), float(np.mean(accs))


def pretrain_epoch(values: np.ndarray, a_hat: np.ndarray, model: StdgiModel, optimizer: Adam,
                   config: PretrainConfig, rng: np.random.Generator, lr: float,
                   time_range: tuple[int, int] | None = None) -> float:
    """One pass over shuffled anchor steps; returns the step-weighted mean loss."""
    if time_range is None:
        time_range = (0, values.shape[0])
    steps = valid_time_steps(time_range, config.ks)
    if len(steps) == 0:
        raise ConfigError(f"time range {time_range} too short for horizon {max(config.ks)}")
    steps = rng.permutation(steps)
    total = 0.0
    for i in range(0, len(steps), config.batch_size):
        ts = steps[i:i + config.batch_size]
        assert ts.max() + max(config.ks) < time_range[1]
        optimizer.zero_grad()
        with Tape() as tape:
            loss, _ = batch_loss(values, a_hat, model, ts, rng)
        tape.backward(loss)
        optimizer.step(lr)
        total += loss.item() * len(ts)
    return total / len(steps)


def pretrain(values: np.ndarray, a_hat, config: PretrainConfig,
             train_range: tuple[int, int] | None = None,
             heldout_range: tuple[int, int] | None = None):
    """Train encoder and discriminators; returns ``(model, history)``.

    ``values`` is the normalized ``(T, N, F)`` feature array. Only
    ``train_range`` feeds the optimizer; ``heldout_range`` (default: the
    training range) provides a fixed pair set for monitoring accuracy.
    """
    a_hat = np.asarray(getattr(a_hat, "a_hat", a_hat))
    values = np.asarray(values, dtype=float)
    train_range = train_range or (0, values.shape[0])
    heldout_range = heldout_range or train_range
    if len(valid_time_steps(train_range, config.ks)) == 0:
        raise ConfigError(f"training range {train_range} too short for horizon {max(config.ks)}")
    rng = np.random.default_rng(config.seed)
    model = StdgiModel.init(rng, values.shape[-1], config)
    opt = Adam(model.parameters())
    sched = config.schedule

    eval_ts = valid_time_steps(heldout_range, config.ks)
    if len(eval_ts) == 0:
        eval_ts = valid_time_steps(train_range, config.ks)
    eval_seed = config.seed + 7919
    hist = TrainHistory()
    hist.initial_loss, hist.initial_accuracy = evaluate_pairs(values, a_hat, model, eval_ts, eval_seed)
    log.info("pretrain init: loss %.4f acc %.3f", hist.initial_loss, hist.initial_accuracy)

    for epoch in range(config.epochs):
        lr = lr_at_epoch(sched, epoch)
        loss = pretrain_epoch(values, a_hat, model, opt, config, rng, lr, train_range)
        if not math.isfinite(loss) or not all(np.isfinite(t.data).all() for t in model.parameters()):
            raise DivergenceError(f"pretraining diverged at epoch {epoch} (loss {loss})")
        _, acc = evaluate_pairs(values, a_hat, model, eval_ts, eval_seed)
        hist.loss.append(loss)
        hist.accuracy.append(acc)
        hist.lr.append(lr)
        log.info("pretrain epoch %d: loss %.4f heldout acc %.3f lr %.1e", epoch, loss, acc, lr)
    return model, hist


def export_embeddings(values: np.ndarray, a_hat, encoder: EncoderParams, chunk: int = 512) -> np.ndarray:
    """Embeddings for every time step, shape ``(T, N, K)``."""
    a_hat = np.asarray(getattr(a_hat, "a_hat", a_hat))
    out = np.empty(values.shape[:2] + (encoder.embed_dim,))
    for i in range(0, values.shape[0], chunk):
        out[i:i + chunk] = encode(values[i:i + chunk], a_hat, encoder).data
    return out


def pca_projection(embeddings: np.ndarray, dims: int = 2) -> np.ndarray:
    """Project every (t, node) embedding onto the top principal axes; shape ``(T, N, dims)``."""
    T, N, K = embeddings.shape
    flat = embeddings.reshape(T * N, K)
    centered = flat - flat.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return (centered @ vt[:dims].T).reshape(T, N, dims)
