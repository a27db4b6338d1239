"""Experiment stages wired together on disk: synth, pretrain, embed, train, eval, compare."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_tensors, read_embeddings, save_tensors, write_embeddings
from .config import ExperimentConfig
from .dataset import (SPEED, FeatureSeries, NormStats, SplitSpec, fit_normalizer, load_features_csv,
                      make_windows, split_series, synthesize_traffic, write_features_csv)
from .encoder import EncoderParams
from .errors import ConfigError, ValidationError
from .forecaster import (MODES, EmbeddingScaler, LstmParams, Seq2SeqModel, Seq2SeqParams, predict,
                         train_regressor)
from .graph import Graph, load_distances, load_edge_list, make_graph, normalize_adjacency, write_edge_list
from .metrics import MetricsReport, compare_runs, horizon_report
from .mi import DiscriminatorParams
from .numerics import Tensor
from .params import named_tensors
from .pretrain import StdgiModel, export_embeddings, pca_projection, pretrain

log = logging.getLogger(__name__)


@dataclass
class Data:
    series: FeatureSeries
    graph: Graph
    split: SplitSpec
    stats: NormStats

    @property
    def values(self) -> np.ndarray:
        return self.stats.apply(self.series).values


def seed_dir(cfg: ExperimentConfig, seed: int) -> Path:
    d = cfg.out / f"seed_{seed}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def features_path(cfg: ExperimentConfig) -> Path:
    return Path(cfg.data.features_path) if cfg.data.features_path else cfg.out / "features.csv"


def edges_path(cfg: ExperimentConfig) -> Path | None:
    if cfg.graph.edges_path:
        return Path(cfg.graph.edges_path)
    if cfg.graph.distances_path:
        return None
    return cfg.out / "edges.csv"


# --------------------------------------------------------------------- synth

def build_synthetic(cfg: ExperimentConfig) -> tuple[Graph, FeatureSeries]:
    g = make_graph(cfg.graph.family, cfg.graph.num_nodes, np.random.default_rng(cfg.graph.seed))
    d = cfg.data
    series = synthesize_traffic(normalize_adjacency(g, cfg.graph.normalization), d.T, d.alpha, d.noise_std,
                                np.random.default_rng(d.seed), beta=d.beta, phase_spread=d.phase_spread,
                                init_low=d.init_low, init_high=d.init_high, step_minutes=d.step_minutes)
    return g, series


def run_synth(cfg: ExperimentConfig) -> dict:
    g, series = build_synthetic(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_features_csv(series, cfg.out / "features.csv")
    write_edge_list(g, cfg.out / "edges.csv")
    (cfg.out / "config.json").write_text(cfg.to_json())
    return {"N": series.N, "T": series.T, "alpha": cfg.data.alpha, "edges": len(g.edges)}


# ---------------------------------------------------------------------- data

def load_data(cfg: ExperimentConfig) -> Data:
    fpath = features_path(cfg)
    series = load_features_csv(fpath, cfg.data.step_minutes)
    epath = edges_path(cfg)
    if epath is not None:
        g = load_edge_list(epath, num_nodes=series.N)
    else:
        g = load_distances(cfg.graph.distances_path, cfg.graph.sigma, cfg.graph.weight_floor, series.N)
    if g.num_nodes != series.N:
        raise ValidationError(f"graph has {g.num_nodes} nodes but features have {series.N}")
    g = normalize_adjacency(g, cfg.graph.normalization)
    split = split_series(series, cfg.data.split, cfg.data.t_in + cfg.data.t_out)
    return Data(series, g, split, fit_normalizer(series, split.train))


# ------------------------------------------------------------------ pretrain

def save_stdgi(path, model: StdgiModel, meta: dict) -> None:
    tensors = {f"encoder.{k}": v for k, v in named_tensors(model.encoder).items()}
    for d in model.discriminators:
        tensors.update({f"disc.k{d.k}.{k}": v for k, v in named_tensors(d).items()})
    meta = dict(meta, ks=[d.k for d in model.discriminators])
    save_tensors(path, "stdgi", tensors, meta)


def load_stdgi(path) -> tuple[StdgiModel, dict]:
    t, meta = load_tensors(path, "stdgi")
    enc = EncoderParams(**{k: Tensor(t[f"encoder.{k}"], requires_grad=True)
                           for k in ("linear_w", "linear_b", "gc1_w", "gc1_b", "gc2_w", "gc2_b")})
    discs = [DiscriminatorParams(*(Tensor(t[f"disc.k{k}.{n}"], requires_grad=True)
                                   for n in ("w1", "b1", "w2", "b2")), k=k) for k in meta["ks"]]
    return StdgiModel(enc, discs), meta


def run_pretrain(cfg: ExperimentConfig, seed: int, data: Data | None = None):
    data = data or load_data(cfg)
    pcfg = cfg.pretrain.build(seed)
    model, hist = pretrain(data.values, data.graph, pcfg, data.split.train, data.split.val)
    out = seed_dir(cfg, seed)
    save_stdgi(out / "stdgi.json", model, {
        "seed": seed, "in_dim": data.series.F, "embed_dim": pcfg.embed_dim, "num_nodes": data.series.N,
        "norm": data.stats.to_dict(), "initial_loss": hist.initial_loss,
        "initial_accuracy": hist.initial_accuracy})
    (out / "pretrain_history.jsonl").write_text(hist.to_jsonl())
    return hist


# --------------------------------------------------------------------- embed

def run_embed(cfg: ExperimentConfig, seed: int, data: Data | None = None, pca: bool = True) -> np.ndarray:
    data = data or load_data(cfg)
    out = seed_dir(cfg, seed)
    ckpt = out / "stdgi.json"
    if not ckpt.exists():
        raise FileNotFoundError(f"missing encoder checkpoint {ckpt}; run pretrain first")
    model, meta = load_stdgi(ckpt)
    if model.encoder.in_dim != data.series.F or model.encoder.embed_dim != cfg.pretrain.embed_dim:
        raise ValidationError(
            f"checkpoint encoder is {model.encoder.in_dim}->{model.encoder.embed_dim}, config/data need "
            f"{data.series.F}->{cfg.pretrain.embed_dim}")
    emb = export_embeddings(data.values, data.graph, model.encoder)
    write_embeddings(out / "embeddings.bin", emb)
    if pca:
        write_pca_csv(out / "pca.csv", pca_projection(emb), data.series.speed)
    return emb


def write_pca_csv(path, proj: np.ndarray, speed: np.ndarray, lead: int = 3) -> None:
    """Rows ``t,node,x,y,speed_t_plus_3``; the speed is ``nan`` past the series end."""
    T, N, _ = proj.shape
    proj, speed = proj.tolist(), np.asarray(speed).tolist()
    with open(path, "w") as fh:
        fh.write("t,node,x,y,speed_t_plus_3\n")
        for t in range(T):
            for v in range(N):
                sp = speed[t + lead][v] if t + lead < T else float("nan")
                fh.write(f"{t},{v},{proj[t][v][0]!r},{proj[t][v][1]!r},{sp!r}\n")


# --------------------------------------------------------------------- train

def save_regressor(path, model: Seq2SeqModel, meta: dict) -> None:
    p = model.params
    tensors = {f"encoder.{k}": v for k, v in named_tensors(p.encoder).items()}
    tensors.update({f"decoder.{k}": v for k, v in named_tensors(p.decoder).items()})
    tensors.update({"head_w": p.head_w, "head_b": p.head_b})
    if model.scaler is not None:
        tensors.update({"scaler.mean": model.scaler.mean, "scaler.std": model.scaler.std})
    save_tensors(path, "regressor", tensors,
                 dict(meta, mode=model.mode, t_in=model.t_in, t_out=model.t_out, d_in=p.d_in))


def load_regressor(path) -> tuple[Seq2SeqModel, dict]:
    t, meta = load_tensors(path, "regressor")

    def lstm(prefix):
        return LstmParams(*(Tensor(t[f"{prefix}.{n}"], requires_grad=True) for n in ("w_x", "w_h", "b")))

    params = Seq2SeqParams(lstm("encoder"), lstm("decoder"), Tensor(t["head_w"], requires_grad=True),
                           Tensor(t["head_b"], requires_grad=True))
    scaler = EmbeddingScaler(t["scaler.mean"], t["scaler.std"]) if "scaler.mean" in t else None
    return Seq2SeqModel(params, meta["mode"], scaler, meta["t_in"], meta["t_out"]), meta


def _embeddings_for(cfg: ExperimentConfig, seed: int, mode: str, data: Data) -> np.ndarray | None:
    if mode != "stdgi":
        return None
    path = seed_dir(cfg, seed) / "embeddings.bin"
    if not path.exists():
        raise ConfigError(f"stdgi mode needs embeddings at {path}; run embed first")
    emb = read_embeddings(path)
    if emb.shape[:2] != (data.series.T, data.series.N):
        raise ValidationError(f"embeddings {emb.shape} do not cover series {(data.series.T, data.series.N)}")
    return emb


def run_train(cfg: ExperimentConfig, seed: int, mode: str, data: Data | None = None):
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    data = data or load_data(cfg)
    emb = _embeddings_for(cfg, seed, mode, data)
    d = cfg.data
    rcfg = cfg.regressor.build(seed, mode, d.t_in, d.t_out)
    train_w = make_windows(data.series, d.t_in, d.t_out, data.split.train)
    val_w = make_windows(data.series, d.t_in, d.t_out, data.split.val)
    d_in = data.series.F + (0 if emb is None else emb.shape[-1])
    print(f"[{mode}] seed {seed}: regressor input dim {d_in}")
    model, hist = train_regressor(data.values, train_w, val_w, data.stats, rcfg, emb, data.split.train)
    out = seed_dir(cfg, seed)
    save_regressor(out / f"regressor_{mode}.json", model,
                   {"seed": seed, "best_epoch": hist.best_epoch, "norm": data.stats.to_dict()})
    lines = [json.dumps({"epoch": -1, "val_mae": hist.initial_val_mae})]
    lines += [json.dumps({"epoch": i, "train_loss": l, "val_mae": v, "lr": r})
              for i, (l, v, r) in enumerate(zip(hist.train_loss, hist.val_mae, hist.lr))]
    (out / f"train_history_{mode}.jsonl").write_text("\n".join(lines) + "\n")
    return hist


# ---------------------------------------------------------------------- eval

def run_eval(cfg: ExperimentConfig, seed: int, mode: str, data: Data | None = None) -> MetricsReport:
    data = data or load_data(cfg)
    out = seed_dir(cfg, seed)
    path = out / f"regressor_{mode}.json"
    if not path.exists():
        raise FileNotFoundError(f"missing regressor checkpoint {path}; run train first")
    model, _ = load_regressor(path)
    emb = _embeddings_for(cfg, seed, mode, data)
    test_w = make_windows(data.series, model.t_in, model.t_out, data.split.test)
    preds, trues = predict(model, data.values, test_w, data.stats, emb)
    report = horizon_report(preds, trues, cfg.metrics.horizons, seed=seed, mode=mode,
                            step_minutes=cfg.data.step_minutes)
    (out / f"report_{mode}.json").write_text(report.to_json() + "\n")
    if cfg.metrics.dump_predictions:
        write_predictions_csv(out / f"predictions_{mode}.csv", preds, trues)
    return report


def write_predictions_csv(path, preds: np.ndarray, trues: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("sample,node,step,pred,true\n")
        S, steps, N = preds.shape
        preds, trues = preds.tolist(), trues.tolist()
        for s in range(S):
            for v in range(N):
                for j in range(steps):
                    fh.write(f"{s},{v},{j + 1},{preds[s][j][v]!r},{trues[s][j][v]!r}\n")


def run_compare(cfg: ExperimentConfig, seeds=None):
    seeds = list(seeds if seeds is not None else cfg.seeds)
    reports = []
    for seed in seeds:
        for mode in MODES:
            path = cfg.out / f"seed_{seed}" / f"report_{mode}.json"
            if not path.exists():
                raise FileNotFoundError(f"missing report {path}; run eval first")
            reports.append(MetricsReport.from_dict(json.loads(path.read_text())))
    cmp = compare_runs(reports)
    (cfg.out / "comparison.json").write_text(cmp.to_json() + "\n")
    (cfg.out / "comparison.txt").write_text(cmp.table(cfg.data.step_minutes))
    return cmp


def run_all(cfg: ExperimentConfig, seeds=None):
    """Every stage for every seed; synthesizes data first when no features file is configured."""
    seeds = list(seeds if seeds is not None else cfg.seeds)
    if cfg.synthetic:
        run_synth(cfg)
    data = load_data(cfg)
    histories = {}
    for seed in seeds:
        histories[seed] = run_pretrain(cfg, seed, data)
        run_embed(cfg, seed, data)
        for mode in MODES:
            run_train(cfg, seed, mode, data)
            run_eval(cfg, seed, mode, data)
    return run_compare(cfg, seeds), histories
