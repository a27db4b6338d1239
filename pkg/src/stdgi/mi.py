"""Discriminator, corruption, and the binary cross-entropy InfoMax objective."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ValidationError
from .numerics import (Tensor, add, as_tensor, clip, concat, glorot_init, log, matmul, mean, mul,
                       relu, reshape, sigmoid, sub, zeros_param)

DISC_HIDDEN = 6
EPS = 1e-7


@dataclass
class DiscriminatorParams:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    k: int = field(default=1)

    @classmethod
    def init(cls, rng: np.random.Generator, embed_dim: int = 128, feat_dim: int = 2,
             hidden: int = DISC_HIDDEN, k: int = 1) -> "DiscriminatorParams":
        return cls(glorot_init(embed_dim + feat_dim, hidden, rng), zeros_param(hidden),
                   glorot_init(hidden, 1, rng), zeros_param(1), k)

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]


def corrupt(x_t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Shuffle node rows (all channels together) with a uniform random permutation."""
    x_t = np.asarray(x_t)
    if x_t.shape[0] < 2:
        raise ValidationError("corruption needs at least two nodes to permute")
    return x_t[rng.permutation(x_t.shape[0])]


def corrupt_batch(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent row permutation for every leading index of a ``(B, N, F)`` array."""
    B, N = x.shape[:2]
    if N < 2:
        raise ValidationError("corruption needs at least two nodes to permute")
    perms = np.argsort(rng.random((B, N)), axis=1)
    return np.take_along_axis(x, perms[:, :, None], axis=1)


def discriminate(h, x, params: DiscriminatorParams) -> Tensor:
    """Probability that ``(h, x)`` is a genuine (embedding, future features) pair.

    Accepts single vectors or any matching leading batch shape; returns the
    same leading shape with a trailing axis of size 1.
    """
    h, x = as_tensor(h), as_tensor(x)
    if h.shape[-1] + x.shape[-1] != params.in_dim:
        raise DimensionError(
            f"discriminate: {h.shape[-1]} + {x.shape[-1]} inputs, discriminator expects {params.in_dim}")
    if h.shape[:-1] != x.shape[:-1]:
        raise DimensionError(f"discriminate: batch shapes {h.shape} and {x.shape} differ")
    hx = concat([h, x], axis=-1)
    squeeze = hx.ndim == 1
    if squeeze:
        hx = reshape(hx, (1, -1))
    z = relu(add(matmul(hx, params.w1), params.b1))
    out = sigmoid(add(matmul(z, params.w2), params.b2))
    return out[0] if squeeze else out


def infomax_loss(pos_scores, neg_scores) -> Tensor:
    """``-(mean log pos + mean log(1 - neg)) / 2`` with scores clamped to [1e-7, 1 - 1e-7]."""
    pos, neg = as_tensor(pos_scores), as_tensor(neg_scores)
    if pos.size == 0 or neg.size == 0:
        raise ValidationError("infomax_loss needs non-empty score batches")
    pos = clip(pos, EPS, 1 - EPS)
    neg = clip(neg, EPS, 1 - EPS)
    total = add(mean(log(pos)), mean(log(sub(1.0, neg))))
    return mul(total, -0.5)


def pair_accuracy(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Balanced accuracy of thresholding scores at 0.5."""
    return 0.5 * (float(np.mean(np.asarray(pos_scores) > 0.5)) + float(np.mean(np.asarray(neg_scores) < 0.5)))
