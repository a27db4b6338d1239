"""Weighted directed sensor graph and its propagation matrix."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class Graph:
    num_nodes: int
    edges: tuple[tuple[int, int, float], ...]
    normalized_adjacency: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValidationError(f"graph needs at least one node, got {self.num_nodes}")
        seen = set()
        for src, dst, w in self.edges:
            if not (0 <= src < self.num_nodes and 0 <= dst < self.num_nodes):
                raise ValidationError(f"edge ({src}, {dst}) outside node range [0, {self.num_nodes})")
            if not w > 0:
                raise ValidationError(f"edge ({src}, {dst}) has non-positive weight {w}")
            if (src, dst) in seen:
                raise ValidationError(f"duplicate edge ({src}, {dst})")
            seen.add((src, dst))

    @property
    def a_hat(self) -> np.ndarray:
        if self.normalized_adjacency is None:
            raise ValidationError("graph is not normalized; call normalize_adjacency first")
        return self.normalized_adjacency

    def weight_matrix(self) -> np.ndarray:
        w = np.zeros((self.num_nodes, self.num_nodes))
        for src, dst, weight in self.edges:
            w[src, dst] = weight
        return w

    def permuted(self, perm: np.ndarray) -> "Graph":
        """Relabel nodes so that new node i is old node ``perm[i]``."""
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        edges = tuple((int(inv[s]), int(inv[d]), w) for s, d, w in self.edges)
        a = None
        if self.normalized_adjacency is not None:
            a = self.normalized_adjacency[np.ix_(perm, perm)]
        return Graph(self.num_nodes, edges, a)


def graph_from_distances(distances: Iterable[tuple[int, int, float]], sigma: float | None = None,
                         weight_floor: float = 0.1, num_nodes: int | None = None) -> Graph:
    """Gaussian-kernel graph: ``w = exp(-d^2 / sigma^2)``, dropping ``w < weight_floor``.

    ``sigma`` defaults to the standard deviation of the non-self distances.
    """
    rows = [(int(s), int(d), float(m)) for s, d, m in distances]
    for s, d, m in rows:
        if m < 0:
            raise ValidationError(f"negative distance {m} for edge ({s}, {d})")
    if not 0 < weight_floor < 1:
        raise ValidationError(f"weight_floor must lie in (0, 1), got {weight_floor}")
    off = [m for s, d, m in rows if s != d]
    if sigma is None:
        sigma = float(np.std(off)) if off else 1.0
        if sigma == 0:
            sigma = 1.0
    if sigma <= 0:
        raise ValidationError(f"sigma must be > 0, got {sigma}")
    n = num_nodes if num_nodes is not None else 1 + max((max(s, d) for s, d, _ in rows), default=0)
    edges = {}
    for s, d, m in rows:
        if s == d:
            continue
        w = float(np.exp(-(m * m) / (sigma * sigma)))
        if w >= weight_floor:
            edges[(s, d)] = w
    return Graph(n, tuple((s, d, w) for (s, d), w in sorted(edges.items())))


def normalize_adjacency(g: Graph, mode: str = "row") -> Graph:
    """Attach the propagation matrix built from ``W + I``.

    ``row`` gives ``D^-1 (W + I)`` (row-stochastic, suitable for directed
    graphs); ``symmetric`` gives ``D^-1/2 (W + I) D^-1/2`` for undirected ones.
    """
    a = g.weight_matrix() + np.eye(g.num_nodes)
    deg = a.sum(axis=1)
    if mode == "row":
        a_hat = a / deg[:, None]
    elif mode == "symmetric":
        d = 1.0 / np.sqrt(deg)
        a_hat = d[:, None] * a * d[None, :]
    else:
        raise ValidationError(f"unknown normalization mode {mode!r}")
    a_hat.setflags(write=False)
    return Graph(g.num_nodes, g.edges, a_hat)


def _read_rows(path: Path, header: list[str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [c.strip() for c in first] != header:
            raise ParseError(f"{path}: expected header {','.join(header)}, got {first}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: expected {len(header)} fields, got {len(row)}", line=lineno)
            try:
                yield lineno, int(row[0]), int(row[1]), float(row[2])
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None


def load_edge_list(path, num_nodes: int | None = None) -> Graph:
    """Read a ``src,dst,weight`` CSV. ``num_nodes`` overrides ``1 + max id``."""
    edges = []
    for lineno, s, d, w in _read_rows(Path(path), ["src", "dst", "weight"]):
        if not w > 0:
            raise ValidationError(f"{path}: line {lineno}: weight must be > 0, got {w}")
        if s < 0 or d < 0:
            raise ValidationError(f"{path}: line {lineno}: negative node id")
        edges.append((s, d, w))
    n = num_nodes if num_nodes is not None else 1 + max((max(s, d) for s, d, _ in edges), default=-1)
    if n < 1:
        raise ValidationError(f"{path}: no edges and no node count given")
    return Graph(n, tuple(edges))


def load_distances(path, sigma: float | None = None, weight_floor: float = 0.1,
                   num_nodes: int | None = None) -> Graph:
    """Read a ``src,dst,distance_m`` CSV and apply the Gaussian kernel."""
    rows = [(s, d, m) for _, s, d, m in _read_rows(Path(path), ["src", "dst", "distance_m"])]
    return graph_from_distances(rows, sigma=sigma, weight_floor=weight_floor, num_nodes=num_nodes)


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("src,dst,weight\n")
        for s, d, w in g.edges:
            fh.write(f"{s},{d},{float(w)!r}\n")


# ------------------------------------------------------------ synthetic graphs

def random_geometric_graph(num_nodes: int, rng: np.random.Generator, scale_m: float = 10_000.0,
                           weight_floor: float = 0.1) -> Graph:
    """Sensors dropped uniformly in a square; kernel weights from pairwise distances."""
    pts = rng.uniform(0, scale_m, size=(num_nodes, 2))
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    rows = [(i, j, dist[i, j]) for i in range(num_nodes) for j in range(num_nodes)]
    return graph_from_distances(rows, weight_floor=weight_floor, num_nodes=num_nodes)


def ring_graph(num_nodes: int) -> Graph:
    edges = set()
    for i in range(num_nodes):
        for j in ((i + 1) % num_nodes, (i - 1) % num_nodes):
            if j != i:
                edges.add((i, j))
    return Graph(num_nodes, tuple((s, d, 1.0) for s, d in sorted(edges)))


def path_graph(num_nodes: int) -> Graph:
    edges = []
    for i in range(num_nodes - 1):
        edges += [(i, i + 1, 1.0), (i + 1, i, 1.0)]
    return Graph(num_nodes, tuple(edges))


def star_graph(num_nodes: int) -> Graph:
    """Node 0 is the hub, linked both ways to every leaf."""
    edges = []
    for leaf in range(1, num_nodes):
        edges += [(0, leaf, 1.0), (leaf, 0, 1.0)]
    return Graph(num_nodes, tuple(edges))


GRAPH_FAMILIES = ("geometric", "ring", "path", "star")


def make_graph(family: str, num_nodes: int, rng: np.random.Generator) -> Graph:
    if family == "geometric":
        return random_geometric_graph(num_nodes, rng)
    if family == "ring":
        return ring_graph(num_nodes)
    if family == "path":
        return path_graph(num_nodes)
    if family == "star":
        return star_graph(num_nodes)
    raise ValidationError(f"unknown graph family {family!r}; expected one of {GRAPH_FAMILIES}")
