"""Experiment configuration: strict JSON schema with full-default emission."""
from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .forecaster import RegressorConfig
from .graph import GRAPH_FAMILIES
from .pretrain import PretrainConfig


@dataclass
class GraphSection:
    family: str = "ring"
    num_nodes: int = 20
    seed: int = 0
    edges_path: str | None = None
    distances_path: str | None = None
    sigma: float | None = None
    weight_floor: float = 0.1
    normalization: str = "row"

    def validate(self):
        if self.edges_path is None and self.distances_path is None and self.family not in GRAPH_FAMILIES:
            raise ConfigError(f"graph.family must be one of {GRAPH_FAMILIES}")
        if self.num_nodes < 1:
            raise ConfigError("graph.num_nodes must be >= 1")
        if self.normalization not in ("row", "symmetric"):
            raise ConfigError("graph.normalization must be 'row' or 'symmetric'")
        if not 0 < self.weight_floor < 1:
            raise ConfigError("graph.weight_floor must lie in (0, 1)")


@dataclass
class DataSection:
    features_path: str | None = None
    T: int = 2000
    alpha: float = 0.5
    noise_std: float = 0.5
    beta: float = 1.0
    phase_spread: float = 1.0
    init_low: float = 30.0
    init_high: float = 70.0
    step_minutes: int = 5
    seed: int = 0
    split: tuple[float, float, float] = (0.7, 0.1, 0.2)
    t_in: int = 12
    t_out: int = 12

    def validate(self):
        if not 0 <= self.alpha <= 1:
            raise ConfigError(f"data.alpha must lie in [0, 1], got {self.alpha}")
        if not 0 <= self.phase_spread <= 1:
            raise ConfigError("data.phase_spread must lie in [0, 1]")
        if self.noise_std < 0:
            raise ConfigError("data.noise_std must be >= 0")
        if self.T < 1 or self.step_minutes < 1 or self.t_in < 1 or self.t_out < 1:
            raise ConfigError("data.T, step_minutes, t_in, t_out must be >= 1")


@dataclass
class PretrainSection:
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

    def build(self, seed: int) -> PretrainConfig:
        return PretrainConfig(seed=seed, **dataclasses.asdict(self))


@dataclass
class RegressorSection:
    epochs: int = 120
    batch_size: int = 64
    base_lr: float = 1e-2
    warm_epochs: int = 20
    period: int = 30
    factor: float = 0.1
    milestones: tuple[int, ...] | None = None
    hidden: int = 64
    max_train_samples: int | None = None
    grad_clip: float | None = None

    def build(self, seed: int, mode: str, t_in: int, t_out: int) -> RegressorConfig:
        return RegressorConfig(seed=seed, mode=mode, t_in=t_in, horizon=t_out, **dataclasses.asdict(self))


@dataclass
class MetricsSection:
    horizons: tuple[int, ...] = (3, 6, 12)
    dump_predictions: bool = False


@dataclass
class ExperimentConfig:
    graph: GraphSection = field(default_factory=GraphSection)
    data: DataSection = field(default_factory=DataSection)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    regressor: RegressorSection = field(default_factory=RegressorSection)
    metrics: MetricsSection = field(default_factory=MetricsSection)
    seeds: tuple[int, ...] = (0, 1, 2)
    output_dir: str = "runs/default"

    def __post_init__(self):
        self.graph.validate()
        self.data.validate()
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if any(h > self.data.t_out or h < 1 for h in self.metrics.horizons):
            raise ConfigError(f"metrics.horizons must lie in [1, {self.data.t_out}]")
        # surface pretrain/regressor validation errors at load time
        self.pretrain.build(self.seeds[0])
        self.regressor.build(self.seeds[0], "baseline", self.data.t_in, self.data.t_out)

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @property
    def synthetic(self) -> bool:
        return self.data.features_path is None

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _build(cls, d, "config")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(raw)


def _build(cls, d, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kw = {k: _coerce(hints[k], v, f"{where}.{k}") for k, v in d.items()}
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _coerce(tp, value, where: str):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, where)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, where)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        inner = typing.get_args(tp)[0]
        return tuple(_coerce(inner, v, where) for v in value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    return value
