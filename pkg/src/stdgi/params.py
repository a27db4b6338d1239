"""Helpers for dataclass-based parameter groups."""
from __future__ import annotations

import dataclasses

import numpy as np

from .numerics import Tensor


def named_tensors(group) -> dict[str, Tensor]:
    return {f.name: getattr(group, f.name) for f in dataclasses.fields(group)
            if isinstance(getattr(group, f.name), Tensor)}


def tensors(group) -> list[Tensor]:
    return list(named_tensors(group).values())


def clone(group):
    """Deep copy with fresh trainable tensors."""
    kw = {}
    for f in dataclasses.fields(group):
        val = getattr(group, f.name)
        kw[f.name] = Tensor(val.data.copy(), requires_grad=True) if isinstance(val, Tensor) else val
    return type(group)(**kw)


def all_finite(group) -> bool:
    return all(np.isfinite(t.data).all() for t in tensors(group))
