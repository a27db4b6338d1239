"""Parameter initialization, Adam, and the step-decay learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DimensionError
from .tensor import Tensor


def glorot_init(fan_in: int, fan_out: int, rng: np.random.Generator) -> Tensor:
    """Uniform Glorot initialization in ``±sqrt(6 / (fan_in + fan_out))``."""
    if fan_in < 1 or fan_out < 1:
        raise ConfigError(f"fans must be >= 1, got {fan_in}, {fan_out}")
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)


def zeros_param(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[Tensor], **kw) -> "AdamState":
        return cls(m=[np.zeros(p.shape) for p in params],
                   v=[np.zeros(p.shape) for p in params], **kw)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray | None],
              state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place.

    A ``None`` gradient is treated as zero (the parameter did not take part in
    the loss), which still advances the moment decay like any other step.
    """
    if lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise DimensionError("params, grads and optimizer state differ in length")
    state.t += 1
    b1, b2, eps, t = state.beta1, state.beta2, state.epsilon, state.t
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros(p.shape)
        if g.shape != p.shape or m.shape != p.shape:
            raise DimensionError(f"adam: grad shape {g.shape} does not match param {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


class Adam:
    """Thin stateful wrapper: owns an :class:`AdamState` for a fixed param list."""

    def __init__(self, params: Sequence[Tensor], **kw):
        self.params = list(params)
        self.state = AdamState.for_params(self.params, **kw)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, lr: float) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state, lr)


@dataclass(frozen=True)
class LrSchedule:
    """Step decay: multiply by ``factor`` at each milestone epoch.

    Milestones default to ``warm_epochs + period * i`` for i = 1, 2, ...
    (50, 80, 110, ... with the defaults); an explicit list overrides them.
    """

    base_lr: float
    warm_epochs: int = 20
    period: int = 30
    factor: float = 0.1
    milestones: tuple[int, ...] | None = field(default=None)

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ConfigError("base_lr must be > 0")
        if not 0 < self.factor < 1:
            raise ConfigError("factor must lie in (0, 1)")
        if self.warm_epochs < 1 or self.period < 1:
            raise ConfigError("warm_epochs and period must be >= 1")

    def decays_before(self, epoch: int) -> int:
        if self.milestones is not None:
            return sum(1 for m in self.milestones if m <= epoch)
        if epoch < self.warm_epochs + self.period:
            return 0
        return (epoch - self.warm_epochs) // self.period


def lr_at_epoch(sched: LrSchedule, epoch: int) -> float:
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return sched.base_lr * sched.factor ** sched.decays_before(epoch)
