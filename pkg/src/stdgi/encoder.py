"""Graph-convolutional encoder: one time step of node features to embeddings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .numerics import Tensor, add, as_tensor, glorot_init, matmul, relu, unary_map, zeros_param

HIDDEN = 64
EMBED_DIM = 128


@dataclass
class EncoderParams:
    linear_w: Tensor
    linear_b: Tensor
    gc1_w: Tensor
    gc1_b: Tensor
    gc2_w: Tensor
    gc2_b: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, in_dim: int = 2, hidden: int = HIDDEN,
             embed_dim: int = EMBED_DIM) -> "EncoderParams":
        return cls(
            linear_w=glorot_init(in_dim, hidden, rng), linear_b=zeros_param(hidden),
            gc1_w=glorot_init(hidden, hidden, rng), gc1_b=zeros_param(hidden),
            gc2_w=glorot_init(hidden, embed_dim, rng), gc2_b=zeros_param(embed_dim),
        )

    @property
    def in_dim(self) -> int:
        return self.linear_w.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.gc2_w.shape[1]


def gcn_layer(h_in, a_hat, weight: Tensor, bias: Tensor, activation: str | None = "relu") -> Tensor:
    """``activation(A_hat @ h_in @ weight + bias)``; ``h_in`` may carry a leading batch axis."""
    h_in, a_hat = as_tensor(h_in), as_tensor(a_hat)
    n = a_hat.shape[0]
    if a_hat.ndim != 2 or a_hat.shape[1] != n or h_in.ndim < 2 or h_in.shape[-2] != n:
        raise DimensionError(f"gcn_layer: adjacency {a_hat.shape} does not match features {h_in.shape}")
    if h_in.shape[-1] != weight.shape[0]:
        raise DimensionError(f"gcn_layer: features {h_in.shape} do not match weight {weight.shape}")
    pre = add(matmul(matmul(a_hat, h_in), weight), bias)
    return pre if activation is None else unary_map(pre, activation)


def encode(x_t, a_hat, params: EncoderParams) -> Tensor:
    """Embeddings ``(..., N, K)`` for features ``(..., N, F)`` at a single time step.

    A leading batch axis is treated as independent time steps sharing the graph.
    """
    x_t = as_tensor(x_t)
    a_hat = np.asarray(getattr(a_hat, "a_hat", a_hat))
    if x_t.ndim < 2 or x_t.shape[-2] != a_hat.shape[0]:
        raise DimensionError(f"encode: features {x_t.shape} do not match graph with {a_hat.shape[0]} nodes")
    if x_t.shape[-1] != params.in_dim:
        raise DimensionError(f"encode: feature dim {x_t.shape[-1]} != encoder input dim {params.in_dim}")
    h = relu(add(matmul(x_t, params.linear_w), params.linear_b))
    h = gcn_layer(h, a_hat, params.gc1_w, params.gc1_b, "relu")
    return gcn_layer(h, a_hat, params.gc2_w, params.gc2_b, None)
