"""Horizon-resolved MAE / RMSE / MAPE and baseline-vs-STDGI comparison."""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ComparisonError, ConfigError, DimensionError, MetricError

HORIZONS = (3, 6, 12)


def _prepare(pred, true, mask):
    pred = np.asarray(pred, dtype=float).ravel()
    true = np.asarray(true, dtype=float).ravel()
    if pred.shape != true.shape:
        raise DimensionError(f"pred has {pred.size} entries, true has {true.size}")
    keep = np.ones(pred.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).ravel()
    if keep.shape != pred.shape:
        raise DimensionError(f"mask has {keep.size} entries, expected {pred.size}")
    return pred, true, keep


def mae(pred, true, mask=None) -> float:
    pred, true, keep = _prepare(pred, true, mask)
    if not keep.any():
        raise MetricError("MAE undefined: every entry is masked")
    return float(np.mean(np.abs(pred[keep] - true[keep])))


def rmse(pred, true, mask=None) -> float:
    pred, true, keep = _prepare(pred, true, mask)
    if not keep.any():
        raise MetricError("RMSE undefined: every entry is masked")
    return float(np.sqrt(np.mean((pred[keep] - true[keep]) ** 2)))


def mape(pred, true, mask=None, return_masked: bool = False):
    """Mean absolute percentage error as a fraction; zero ground truth is masked out."""
    pred, true, keep = _prepare(pred, true, mask)
    zero = keep & (true == 0)
    keep = keep & ~zero
    if not keep.any():
        raise MetricError("MAPE undefined: every entry is masked")
    value = float(np.mean(np.abs(pred[keep] - true[keep]) / np.abs(true[keep])))
    return (value, int(zero.sum())) if return_masked else value


@dataclass
class HorizonMetrics:
    horizon: int
    mae: float
    rmse: float
    mape: float
    mape_zero_masked: int = 0


@dataclass
class MetricsReport:
    horizons: list[HorizonMetrics]
    seed: int | None = None
    mode: str | None = None
    step_minutes: int = 5

    def by_horizon(self) -> dict[int, HorizonMetrics]:
        return {h.horizon: h for h in self.horizons}

    def to_dict(self) -> dict:
        return {"seed": self.seed, "mode": self.mode, "step_minutes": self.step_minutes,
                "horizons": [asdict(h) for h in self.horizons]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls([HorizonMetrics(**h) for h in d["horizons"]], d.get("seed"), d.get("mode"),
                   d.get("step_minutes", 5))


def horizon_report(preds, trues, horizons=HORIZONS, mask=None, seed=None, mode=None,
                   step_minutes: int = 5) -> MetricsReport:
    """Metrics at individual forecast steps.

    ``preds``/``trues`` are ``(samples, steps, nodes)``; horizon ``j`` (1-based)
    uses only step ``j``'s errors, pooled over samples and nodes.
    """
    preds = np.asarray(preds, dtype=float)
    trues = np.asarray(trues, dtype=float)
    if preds.shape != trues.shape or preds.ndim != 3:
        raise DimensionError(f"preds {preds.shape} and trues {trues.shape} must be equal 3-d arrays")
    steps = preds.shape[1]
    out = []
    for h in horizons:
        if not 1 <= h <= steps:
            raise ConfigError(f"horizon {h} outside forecast length {steps}")
        p, t = preds[:, h - 1], trues[:, h - 1]
        m = None if mask is None else np.asarray(mask)[:, h - 1]
        mp, masked = mape(p, t, m, return_masked=True)
        out.append(HorizonMetrics(h, mae(p, t, m), rmse(p, t, m), mp, masked))
    return MetricsReport(out, seed, mode, step_minutes)


@dataclass
class Comparison:
    horizons: list[int]
    modes: list[str]
    seeds: list[int]
    summary: dict = field(default_factory=dict)
    paired_differences: dict = field(default_factory=dict)
    relative_improvement: dict = field(default_factory=dict)
    per_seed_relative_improvement: dict = field(default_factory=dict)
    trend: str = "flat"
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self, step_minutes: int = 5) -> str:
        """Text table laid out like the usual baseline-vs-method results table."""
        cols = [f"{h * step_minutes} min" for h in self.horizons]
        lines = [f"{'Method':<16}" + "".join(f"{c:>20}" for c in cols)]
        for metric in ("mae", "rmse", "mape"):
            lines.append(f"{metric.upper():-^{16 + 20 * len(cols)}}")
            for mode in self.modes:
                cells = []
                for h in self.horizons:
                    s = self.summary[mode][metric][str(h)]
                    scale = 100.0 if metric == "mape" else 1.0
                    unit = "%" if metric == "mape" else ""
                    cells.append(f"{s['mean'] * scale:.3f} ± {s['std'] * scale:.4f}{unit}")
                lines.append(f"{mode:<16}" + "".join(f"{c:>20}" for c in cells))
        return "\n".join(lines) + "\n"


def compare_runs(reports, baseline: str = "baseline", method: str = "stdgi",
                 metric_for_trend: str = "mae") -> Comparison:
    """Aggregate per-seed reports into mean ± std and paired improvements.

    Relative improvement at a horizon is ``(baseline - method) / baseline`` of
    the seed-mean metric. The trend is ``increasing`` when it grows
    monotonically with horizon.
    """
    reports = list(reports)
    by_mode: dict[str, dict[int, MetricsReport]] = {}
    for r in reports:
        by_mode.setdefault(r.mode, {})
        if r.seed in by_mode[r.mode]:
            raise ComparisonError(f"duplicate report for mode {r.mode!r}, seed {r.seed}")
        by_mode[r.mode][r.seed] = r
    if baseline not in by_mode or method not in by_mode:
        raise ComparisonError(f"need reports for both {baseline!r} and {method!r}, got {sorted(map(str, by_mode))}")
    seeds_b, seeds_m = set(by_mode[baseline]), set(by_mode[method])
    if seeds_b != seeds_m:
        raise ComparisonError(f"seed sets differ: {sorted(seeds_b)} vs {sorted(seeds_m)}")
    seeds = sorted(seeds_b)
    horizons = [h.horizon for h in reports[0].horizons]
    cmp = Comparison(horizons, [baseline, method], seeds)
    if len(seeds) == 1:
        cmp.warnings.append("single seed: standard deviations reported as 0")

    def values(mode, metric, h):
        return np.array([getattr(by_mode[mode][s].by_horizon()[h], metric) for s in seeds])

    for mode in (baseline, method):
        cmp.summary[mode] = {
            metric: {str(h): {"mean": float(values(mode, metric, h).mean()),
                              "std": float(values(mode, metric, h).std()) if len(seeds) > 1 else 0.0}
                     for h in horizons}
            for metric in ("mae", "rmse", "mape")}
    for metric in ("mae", "rmse", "mape"):
        cmp.paired_differences[metric] = {
            str(h): (values(baseline, metric, h) - values(method, metric, h)).tolist() for h in horizons}
        rel = {}
        per_seed = {}
        for h in horizons:
            b = values(baseline, metric, h)
            m = values(method, metric, h)
            rel[str(h)] = float((b.mean() - m.mean()) / b.mean()) if b.mean() != 0 else 0.0
            per_seed[str(h)] = [float((bi - mi) / bi) if bi != 0 else 0.0 for bi, mi in zip(b, m)]
        cmp.relative_improvement[metric] = rel
        cmp.per_seed_relative_improvement[metric] = per_seed
    imp = [cmp.relative_improvement[metric_for_trend][str(h)] for h in horizons]
    diffs = np.diff(imp)
    if np.all(diffs > 0):
        cmp.trend = "increasing"
    elif np.all(diffs < 0):
        cmp.trend = "decreasing"
    elif np.all(diffs == 0):
        cmp.trend = "flat"
    else:
        cmp.trend = "mixed"
    for w in cmp.warnings:
        warnings.warn(w, stacklevel=2)
    return cmp
