"""Per-node LSTM seq2seq regressor, optionally fed with STDGI embeddings."""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import SPEED, NormStats, Windows
from .errors import ConfigError, DimensionError, DivergenceError
from .numerics import (Adam, LrSchedule, Tape, Tensor, absolute, add, as_tensor, concat, glorot_init,
                       lr_at_epoch, lstm_step, matmul, mean, reshape, sub, zeros_param)
from .params import tensors

log = logging.getLogger(__name__)

HIDDEN = 64
MODES = ("baseline", "stdgi")


@dataclass
class LstmParams:
    """Gate blocks are laid out as [input, forget, output, candidate]."""

    w_x: Tensor
    w_h: Tensor
    b: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, d_in: int, hidden: int = HIDDEN,
             forget_bias: float = 1.0) -> "LstmParams":
        b = zeros_param(4 * hidden)
        b.data[hidden:2 * hidden] = forget_bias
        return cls(glorot_init(d_in, 4 * hidden, rng), glorot_init(hidden, 4 * hidden, rng), b)

    @property
    def hidden(self) -> int:
        return self.w_h.shape[0]

    @property
    def d_in(self) -> int:
        return self.w_x.shape[0]


def lstm_cell(x, h, c, params: LstmParams):
    """One LSTM step; returns ``(h', c')``. Works on single vectors or batches."""
    x, h, c = as_tensor(x), as_tensor(h), as_tensor(c)
    H = params.hidden
    if x.shape[-1] != params.d_in or h.shape[-1] != H or c.shape[-1] != H:
        raise DimensionError(
            f"lstm_cell: got x {x.shape}, h {h.shape}, c {c.shape}; expected d_in={params.d_in}, hidden={H}")
    hc = lstm_step(x, concat([h, c], axis=-1), params.w_x, params.w_h, params.b)
    return hc[..., :H], hc[..., H:]


def _step(x, hc, p: LstmParams) -> Tensor:
    return lstm_step(x, hc, p.w_x, p.w_h, p.b)


@dataclass
class Seq2SeqParams:
    encoder: LstmParams
    decoder: LstmParams
    head_w: Tensor
    head_b: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, d_in: int, hidden: int = HIDDEN) -> "Seq2SeqParams":
        return cls(LstmParams.init(rng, d_in, hidden), LstmParams.init(rng, 1, hidden),
                   glorot_init(hidden, 1, rng), zeros_param(1))

    def parameters(self) -> list[Tensor]:
        return tensors(self.encoder) + tensors(self.decoder) + [self.head_w, self.head_b]

    @property
    def d_in(self) -> int:
        return self.encoder.d_in


def seq2seq_batch(inputs, params: Seq2SeqParams, t_out: int = 12, teacher=None) -> Tensor:
    """Forecast ``(B, t_out)`` normalized speeds from ``inputs`` of shape ``(B, T_in, d_in)``.

    The decoder is seeded with the last observed speed (channel 0 of the final
    input step). With ``teacher`` ``(B, t_out)`` given, decoder step j > 0 reads
    the true speed at j - 1; otherwise it reads its own previous prediction.
    """
    inputs = as_tensor(inputs)
    if inputs.ndim != 3 or inputs.shape[-1] != params.d_in:
        raise DimensionError(f"seq2seq: inputs {inputs.shape} do not match d_in={params.d_in}")
    B, T_in, _ = inputs.shape
    H = params.encoder.hidden
    enc, dec = params.encoder, params.decoder

    hc = Tensor(np.zeros((B, 2 * H)))
    for t in range(T_in):
        hc = _step(inputs[:, t], hc, enc)

    last = inputs.data[:, -1, SPEED:SPEED + 1]
    if teacher is not None:
        teacher = np.asarray(teacher, dtype=float).reshape(B, t_out)
        dec_in = np.concatenate([last, teacher[:, :-1]], axis=1)
    preds = []
    prev = Tensor(last)
    for j in range(t_out):
        x = prev if teacher is None else dec_in[:, j:j + 1]
        hc = _step(x, hc, dec)
        prev = add(matmul(hc[:, :H], params.head_w), params.head_b)
        preds.append(prev)
    return concat(preds, axis=1)


def seq2seq_forecast(input_seq, params: Seq2SeqParams, teacher=None, t_in: int = 12,
                     t_out: int = 12) -> Tensor:
    """Single-sequence forecast: ``(t_in, d_in)`` inputs to ``t_out`` predictions."""
    x = as_tensor(input_seq)
    if x.ndim != 2 or x.shape[0] != t_in:
        raise DimensionError(f"seq2seq_forecast: expected a ({t_in}, d_in) sequence, got {x.shape}")
    batch = reshape(x, (1,) + x.shape)
    out = seq2seq_batch(batch, params, t_out, None if teacher is None else np.asarray(teacher)[None])
    return out[0]


def mae_loss(pred: Tensor, target) -> Tensor:
    return mean(absolute(sub(pred, target)))


# ------------------------------------------------------------------ training

@dataclass(frozen=True)
class RegressorConfig:
    epochs: int = 120
    batch_size: int = 64
    base_lr: float = 1e-2
    warm_epochs: int = 20
    period: int = 30
    factor: float = 0.1
    milestones: tuple[int, ...] | None = None
    t_in: int = 12
    horizon: int = 12
    hidden: int = HIDDEN
    mode: str = "baseline"
    seed: int = 0
    max_train_samples: int | None = None
    grad_clip: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("regressor epochs and batch_size must be >= 1")

    @property
    def schedule(self) -> LrSchedule:
        return LrSchedule(self.base_lr, self.warm_epochs, self.period, self.factor, self.milestones)


@dataclass
class EmbeddingScaler:
    """Per-dimension standardization of embeddings, fit on training steps."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, embeddings: np.ndarray, time_range: tuple[int, int]) -> "EmbeddingScaler":
        a, b = time_range
        block = embeddings[a:b].reshape(-1, embeddings.shape[-1])
        std = block.std(axis=0)
        return cls(block.mean(axis=0), np.where(std > 1e-12, std, 1.0))

    def __call__(self, emb: np.ndarray) -> np.ndarray:
        return (emb - self.mean) / self.std


@dataclass
class Seq2SeqModel:
    """Trained regressor bundle: weights plus whatever the inputs need."""

    params: Seq2SeqParams
    mode: str = "baseline"
    scaler: EmbeddingScaler | None = None
    t_in: int = 12
    t_out: int = 12

    def build_inputs(self, values: np.ndarray, embeddings: np.ndarray | None,
                     starts: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        idx = starts[:, None] + np.arange(self.t_in)
        x = values[idx, nodes[:, None]]
        if self.mode == "stdgi":
            if embeddings is None:
                raise ConfigError("stdgi mode needs embeddings")
            x = np.concatenate([x, self.scaler(embeddings[idx, nodes[:, None]])], axis=-1)
        return x

    def forecast(self, inputs: np.ndarray, teacher=None) -> Tensor:
        return seq2seq_batch(inputs, self.params, self.t_out, teacher)


@dataclass
class Persistence:
    """Repeats the last observed speed; runs through the same prediction path."""

    mode: str = "baseline"
    t_in: int = 12
    t_out: int = 12

    def build_inputs(self, values, embeddings, starts, nodes):
        idx = starts[:, None] + np.arange(self.t_in)
        return values[idx, nodes[:, None]]

    def forecast(self, inputs: np.ndarray, teacher=None) -> Tensor:
        last = np.asarray(inputs)[:, -1, SPEED]
        return Tensor(np.repeat(last[:, None], self.t_out, axis=1))


def _targets(values: np.ndarray, starts: np.ndarray, nodes: np.ndarray, t_in: int, t_out: int) -> np.ndarray:
    idx = starts[:, None] + t_in + np.arange(t_out)
    return values[idx, nodes[:, None], SPEED]


def sample_index(windows: Windows, num_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """All (window start, node) pairs, window-major."""
    starts = np.repeat(windows.starts, num_nodes)
    nodes = np.tile(np.arange(num_nodes), len(windows.starts))
    return starts, nodes


@dataclass
class RegressorHistory:
    train_loss: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    initial_val_mae: float = math.nan
    best_epoch: int = -1


def _clip_grads(params: list[Tensor], max_norm: float) -> None:
    total = math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params if p.grad is not None))
    if total > max_norm:
        scale = max_norm / total
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale


def train_regressor(values: np.ndarray, train_windows: Windows, val_windows: Windows | None,
                    stats: NormStats, config: RegressorConfig,
                    embeddings: np.ndarray | None = None,
                    train_range: tuple[int, int] | None = None):
    """Fit one shared seq2seq over all nodes; returns ``(best model, history)``.

    ``values`` are normalized features ``(T, N, F)``. Loss is the MAE over the
    whole horizon in normalized units; the checkpoint with the lowest
    validation MAE (mph) is the one returned.
    """
    if config.mode == "stdgi" and embeddings is None:
        raise ConfigError("stdgi mode requires embeddings")
    T, N, F = values.shape
    rng = np.random.default_rng(config.seed)
    scaler = None
    d_in = F
    if config.mode == "stdgi":
        if embeddings.shape[:2] != (T, N):
            raise ConfigError(f"embeddings {embeddings.shape[:2]} do not cover series {(T, N)}")
        rng_range = train_range or (int(train_windows.starts.min()),
                                    int(train_windows.starts.max()) + config.t_in + config.horizon)
        scaler = EmbeddingScaler.fit(embeddings, rng_range)
        d_in = F + embeddings.shape[-1]
    log.info("regressor input dim: %d (%s)", d_in, config.mode)
    model = Seq2SeqModel(Seq2SeqParams.init(rng, d_in, config.hidden), config.mode, scaler,
                         config.t_in, config.horizon)
    params = model.params.parameters()
    opt = Adam(params)
    sched = config.schedule

    starts, nodes = sample_index(train_windows, N)
    if config.max_train_samples is not None and len(starts) > config.max_train_samples:
        pick = np.sort(rng.choice(len(starts), config.max_train_samples, replace=False))
        starts, nodes = starts[pick], nodes[pick]
    hist = RegressorHistory()

    def val_mae() -> float:
        if val_windows is None or len(val_windows) == 0:
            return math.nan
        preds, trues = predict(model, values, val_windows, stats, embeddings)
        return float(np.mean(np.abs(preds - trues)))

    hist.initial_val_mae = best = val_mae()
    best_params = copy.deepcopy(model.params)
    for epoch in range(config.epochs):
        lr = lr_at_epoch(sched, epoch)
        order = rng.permutation(len(starts))
        total = 0.0
        for i in range(0, len(order), config.batch_size):
            sel = order[i:i + config.batch_size]
            s, v = starts[sel], nodes[sel]
            inputs = model.build_inputs(values, embeddings, s, v)
            target = _targets(values, s, v, config.t_in, config.horizon)
            opt.zero_grad()
            with Tape() as tape:
                loss = mae_loss(model.forecast(inputs, teacher=target), target)
            tape.backward(loss)
            if config.grad_clip:
                _clip_grads(params, config.grad_clip)
            opt.step(lr)
            total += loss.item() * len(sel)
        train_loss = total / len(order)
        if not math.isfinite(train_loss) or not all(np.isfinite(p.data).all() for p in params):
            raise DivergenceError(f"regressor diverged at epoch {epoch} (loss {train_loss})")
        vm = val_mae()
        hist.train_loss.append(train_loss)
        hist.val_mae.append(vm)
        hist.lr.append(lr)
        if math.isnan(best) or vm < best:
            best, hist.best_epoch = vm, epoch
            best_params = copy.deepcopy(model.params)
        log.info("regressor[%s] epoch %d: train %.4f val MAE %.4f lr %.1e",
                 config.mode, epoch, train_loss, vm, lr)
    model.params = best_params
    return model, hist


def predict(model, values: np.ndarray, windows: Windows, stats: NormStats,
            embeddings: np.ndarray | None = None, chunk: int = 4096):
    """Autoregressive forecasts in original units.

    Returns ``(preds, trues)``, each ``(num_windows, t_out, N)``.
    """
    T, N, _ = values.shape
    starts, nodes = sample_index(windows, N)
    out = np.empty(len(starts) * model.t_out).reshape(len(starts), model.t_out)
    for i in range(0, len(starts), chunk):
        s, v = starts[i:i + chunk], nodes[i:i + chunk]
        out[i:i + chunk] = model.forecast(model.build_inputs(values, embeddings, s, v)).data
    trues = _targets(values, starts, nodes, model.t_in, model.t_out)
    W = len(windows)
    preds = stats.inverse_speed(out).reshape(W, N, model.t_out).transpose(0, 2, 1)
    trues = stats.inverse_speed(trues).reshape(W, N, model.t_out).transpose(0, 2, 1)
    return preds, trues
