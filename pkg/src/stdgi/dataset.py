"""Sensor time series: ingestion, synthesis, normalization and windowing."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, IngestionError, NormalizationError, ParseError, ValidationError
from .graph import Graph

log = logging.getLogger(__name__)

SPEED, TIME_OF_DAY = 0, 1
MINUTES_PER_DAY = 1440
SPEED_MAX = 80.0


@dataclass(frozen=True)
class FeatureSeries:
    """Node features over time, shape ``(T, N, F)``; channel 0 speed, 1 time of day."""

    values: np.ndarray
    step_minutes: int = 5

    def __post_init__(self):
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise ValidationError(f"feature series must be a non-empty T x N x F array, got {self.values.shape}")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @property
    def F(self) -> int:
        return self.values.shape[2]

    @property
    def speed(self) -> np.ndarray:
        return self.values[:, :, SPEED]


def time_of_day(T: int, step_minutes: int, start: int = 0) -> np.ndarray:
    t = np.arange(start, start + T)
    return np.mod(t * step_minutes, MINUTES_PER_DAY) / MINUTES_PER_DAY


def with_time_of_day(speed: np.ndarray, step_minutes: int) -> FeatureSeries:
    T, N = speed.shape
    tod = np.broadcast_to(time_of_day(T, step_minutes)[:, None], (T, N))
    return FeatureSeries(np.stack([speed, tod], axis=-1), step_minutes)


def load_features_csv(path, step_minutes: int = 5) -> FeatureSeries:
    """Read a dense ``t,node,speed`` grid. ``t`` is shifted to start at zero."""
    path = Path(path)
    ts, nodes, speeds = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t", "node", "speed"]:
            raise ParseError(f"{path}: expected header t,node,speed, got {header}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}: expected 3 fields, got {len(row)}", line=lineno)
            try:
                ts.append(int(row[0]))
                nodes.append(int(row[1]))
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
            try:
                speeds.append(float(row[2]))
            except ValueError:
                raise ParseError(f"{path}: non-numeric speed {row[2]!r}", line=lineno) from None
    if not ts:
        raise IngestionError(f"{path}: no data rows")
    t = np.asarray(ts) - min(ts)
    node = np.asarray(nodes)
    if node.min() < 0:
        raise IngestionError(f"{path}: negative node id")
    T, N = int(t.max()) + 1, int(node.max()) + 1
    grid = np.full((T, N), np.nan)
    seen = np.zeros((T, N), dtype=bool)
    grid[t, node] = speeds
    seen[t, node] = True
    if not seen.all():
        gt, gn = np.argwhere(~seen)[0]
        raise IngestionError(
            f"{path}: missing cell (t={gt + min(ts)}, node={gn}); {int((~seen).sum())} gaps in total")
    return with_time_of_day(grid, step_minutes)


def write_features_csv(series: FeatureSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t,node,speed\n")
        speed = series.speed.tolist()
        for t in range(series.T):
            for v in range(series.N):
                fh.write(f"{t},{v},{speed[t][v]!r}\n")


# ----------------------------------------------------------------- splitting

@dataclass(frozen=True)
class SplitSpec:
    train: tuple[int, int]
    val: tuple[int, int]
    test: tuple[int, int]

    def ranges(self) -> dict[str, tuple[int, int]]:
        return {"train": self.train, "val": self.val, "test": self.test}


def split_series(series_or_T, ratios=(0.7, 0.1, 0.2), min_length: int = 24) -> SplitSpec:
    """Chronological train/val/test split.

    Sizes are rounded to the nearest step, with the test split taking the
    remainder, so 34249 steps split into 23974 / 3425 / 6850.
    """
    T = series_or_T.T if isinstance(series_or_T, FeatureSeries) else int(series_or_T)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
        raise ConfigError(f"split ratios must be three positive numbers summing to 1, got {ratios}")
    n_train = int(round(T * ratios[0]))
    n_val = int(round(T * ratios[1]))
    spec = SplitSpec((0, n_train), (n_train, n_train + n_val), (n_train + n_val, T))
    for name, (a, b) in spec.ranges().items():
        if b - a < min_length:
            raise ConfigError(f"{name} split has {b - a} steps, fewer than the {min_length} needed for one window")
    return spec


# ------------------------------------------------------------- normalization

@dataclass(frozen=True)
class NormStats:
    mean: float
    std: float

    def apply(self, series: FeatureSeries) -> FeatureSeries:
        v = series.values.copy()
        v[..., SPEED] = (v[..., SPEED] - self.mean) / self.std
        return replace(series, values=v)

    def invert(self, series: FeatureSeries) -> FeatureSeries:
        v = series.values.copy()
        v[..., SPEED] = self.inverse_speed(v[..., SPEED])
        return replace(series, values=v)

    def inverse_speed(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}


def fit_normalizer(series: FeatureSeries, train_range: tuple[int, int]) -> NormStats:
    a, b = train_range
    if b <= a:
        raise NormalizationError(f"empty training range {train_range}")
    speed = series.values[a:b, :, SPEED]
    std = float(speed.std())
    if not std > 0:
        raise NormalizationError("speed has zero variance over the training range")
    return NormStats(float(speed.mean()), std)


def apply_normalizer(series: FeatureSeries, stats: NormStats) -> FeatureSeries:
    return stats.apply(series)


# ---------------------------------------------------------------- windowing

@dataclass(frozen=True)
class WindowSample:
    """Window starting at ``start``: inputs ``[start, start+T_in)``, targets the next ``T_out`` steps."""

    start: int
    input: np.ndarray
    target: np.ndarray


@dataclass(frozen=True)
class Windows:
    """Vectorized window set over one range; ``starts`` are absolute time indices."""

    starts: np.ndarray
    t_in: int = 12
    t_out: int = 12
    short: bool = False

    def __len__(self) -> int:
        return len(self.starts)

    def samples(self, series: FeatureSeries) -> list[WindowSample]:
        return [WindowSample(int(s), series.values[s:s + self.t_in],
                             series.values[s + self.t_in:s + self.t_in + self.t_out, :, SPEED:SPEED + 1])
                for s in self.starts]


def make_windows(series_or_range, t_in: int = 12, t_out: int = 12,
                 range_: tuple[int, int] | None = None) -> Windows:
    """Stride-1 windows that stay entirely inside ``range_``.

    The first argument is either a series (whole length by default) or a
    ``(start, end)`` range itself.
    """
    if range_ is None:
        range_ = (0, series_or_range.T) if isinstance(series_or_range, FeatureSeries) else series_or_range
    a, b = range_
    count = (b - a) - t_in - t_out + 1
    if count <= 0:
        log.warning("range %s too short for a %d+%d window", range_, t_in, t_out)
        return Windows(np.zeros(0, dtype=int), t_in, t_out, short=True)
    return Windows(np.arange(a, a + count), t_in, t_out)


# ---------------------------------------------------------------- synthesis

@dataclass(frozen=True)
class SynthParams:
    T: int = 2000
    alpha: float = 0.5
    noise_std: float = 1.0
    beta: float = 1.0
    phase_spread: float = 1.0
    init_low: float = 30.0
    init_high: float = 70.0
    step_minutes: int = 5


def daily_sinusoid(t: int, step_minutes: int = 5, phase: np.ndarray | float = 0.0):
    """Daily cycle at step ``t``; ``phase`` (radians) may be per node."""
    day = (t * step_minutes % MINUTES_PER_DAY) / MINUTES_PER_DAY
    return np.sin(2 * np.pi * day + phase)


def synthesize_traffic(graph: Graph, T: int = 2000, alpha: float = 0.5, noise_std: float = 1.0,
                       rng: np.random.Generator | None = None, beta: float = 1.0,
                       phase_spread: float = 1.0, init_low: float = 30.0, init_high: float = 70.0,
                       step_minutes: int = 5, initial: np.ndarray | None = None) -> FeatureSeries:
    """Diffusion-coupled speeds.

    ``s[t+1] = (1-alpha) s[t] + alpha A s[t] + beta sin(day phase + phi_v) + noise``,
    clipped to ``[0, 80]``. With ``alpha > 0`` a node's next speed depends on
    its neighbours' current speeds. Node phase offsets ``phi_v`` are drawn
    uniformly from ``[0, 2 pi phase_spread)``; without them diffusion erases
    every persistent difference between sensors.
    """
    if not 0 <= alpha <= 1:
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")
    if T < 1:
        raise ValidationError(f"T must be >= 1, got {T}")
    if noise_std < 0:
        raise ValidationError(f"noise_std must be >= 0, got {noise_std}")
    if not 0 <= phase_spread <= 1:
        raise ValidationError(f"phase_spread must lie in [0, 1], got {phase_spread}")
    rng = rng if rng is not None else np.random.default_rng(0)
    a_hat = graph.a_hat
    N = graph.num_nodes
    phase = rng.uniform(0.0, 2 * np.pi * phase_spread, N)
    s = np.asarray(initial, dtype=float) if initial is not None else rng.uniform(init_low, init_high, N)
    out = np.empty((T, N))
    out[0] = s
    for t in range(T - 1):
        nxt = (1 - alpha) * s + alpha * (a_hat @ s) + beta * daily_sinusoid(t, step_minutes, phase)
        if noise_std > 0:
            nxt = nxt + rng.normal(0.0, noise_std, N)
        s = np.clip(nxt, 0.0, SPEED_MAX)
        out[t + 1] = s
    return with_time_of_day(out, step_minutes)
