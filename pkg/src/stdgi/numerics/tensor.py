"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations record themselves on the innermost active :class:`Tape` whenever
at least one input requires a gradient. Outside a tape, ops are plain numpy
evaluations, which is what inference paths rely on.
"""
from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigError, DimensionError, TapeError

_state = threading.local()


def _tape_stack() -> list["Tape"]:
    stack = getattr(_state, "stack", None)
    if stack is None:
        stack = _state.stack = []
    return stack


def current_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_tape")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def values(self) -> np.ndarray:
        """Row-major flat view of the data."""
        return self.data.reshape(-1)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=self.requires_grad)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Record:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Callable):
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered record of executed ops; supports exactly one backward pass.

    Use as a context manager::

        with Tape() as tape:
            loss = model(x)
        tape.backward(loss)
    """

    def __init__(self):
        self.records: list[_Record] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        else:  # pragma: no cover - misuse of nested tapes
            raise TapeError("tape stack corrupted: exiting a tape that is not innermost")

    def __len__(self) -> int:
        return len(self.records)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Callable) -> None:
        if self.consumed:
            raise TapeError("cannot record on a tape whose backward pass already ran")
        out.requires_grad = True
        out._tape = self
        self.records.append(_Record(out, inputs, backward))

    def backward(self, loss: Tensor) -> None:
        if self.consumed:
            raise TapeError("backward already ran on this tape; run a new forward pass first")
        if loss.size != 1:
            raise TapeError(f"loss must be a scalar, got shape {loss.shape}")
        if loss._tape is not self:
            raise TapeError("loss was not produced on this tape")
        self.consumed = True

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for rec in reversed(self.records):
            g = grads.pop(id(rec.out), None)
            if g is None:
                continue
            for inp, gi in zip(rec.inputs, rec.backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
                if inp._tape is None:
                    leaves[key] = inp
        for key, leaf in leaves.items():
            g = grads[key]
            leaf.grad = g if leaf.grad is None else leaf.grad + g
        self.records.clear()


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


def _make(data: np.ndarray, inputs: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor(data)
    tape = current_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape.record(out, tuple(inputs), backward)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- binary ops

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    if a.ndim > 2 and b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise DimensionError(f"matmul: batch dims differ in {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def bw(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return _make(ad @ bd, (a, b), bw)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    ad, bd = a.data, b.data

    def bw(g):
        ga = _unbroadcast(g * bd, ad.shape) if a.requires_grad else None
        gb = _unbroadcast(g * ad, bd.shape) if b.requires_grad else None
        return ga, gb

    return _make(ad * bd, (a, b), bw)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise DimensionError("concat: no tensors given")
    ndim = ts[0].ndim
    ax = axis % ndim
    for t in ts[1:]:
        if t.ndim != ndim or any(t.shape[i] != ts[0].shape[i] for i in range(ndim) if i != ax):
            raise DimensionError(
                f"concat: shapes {[t.shape for t in ts]} differ outside axis {axis}")
    bounds = np.cumsum([t.shape[ax] for t in ts])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _make(np.concatenate([t.data for t in ts], axis=ax), ts, bw)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    shapes = {t.shape for t in ts}
    if len(shapes) != 1:
        raise DimensionError(f"stack: shapes differ: {sorted(shapes)}")

    def bw(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _make(np.stack([t.data for t in ts], axis=axis), ts, bw)


_BINARY = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "concat_last_dim": lambda a, b: concat([a, b], axis=-1),
}


def binary_map(a, b, f: str) -> Tensor:
    try:
        fn = _BINARY[f]
    except KeyError:
        raise ConfigError(f"unknown binary function {f!r}; expected one of {sorted(_BINARY)}") from None
    return fn(a, b)


# ----------------------------------------------------------------- unary ops

def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)
    return _make(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return _make(y, (x,), lambda g: (g * (1.0 - y * y),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}


def unary_map(x, f: str) -> Tensor:
    try:
        fn = _UNARY[f]
    except KeyError:
        raise ConfigError(f"unknown activation {f!r}; expected one of {sorted(_UNARY)}") from None
    return fn(x)


def identity(x) -> Tensor:
    return as_tensor(x)


def log(x) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    return _make(np.log(xd), (x,), lambda g: (g / xd,))


def absolute(x) -> Tensor:
    x = as_tensor(x)
    sign = np.sign(x.data)
    return _make(np.abs(x.data), (x,), lambda g: (g * sign,))


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp into [lo, hi]; gradient is zero where clamping was active."""
    x = as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return _make(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,))


# --------------------------------------------------------- shape & reductions

def sum(x, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    shape = x.shape

    def bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(np.sum(x.data, axis=axis), (x,), bw)


def mean(x, axis=None) -> Tensor:
    x = as_tensor(x)
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis), 1.0 / n)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def getitem(x, index) -> Tensor:
    x = as_tensor(x)
    shape = x.shape

    def bw(g):
        out = np.zeros(shape)
        if _fancy(index):
            np.add.at(out, index, g)
        else:
            out[index] = g
        return (out,)

    return _make(x.data[index], (x,), bw)


def _fancy(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


# ------------------------------------------------------------------ fused ops

def lstm_step(x, hc, w_x, w_h, b) -> Tensor:
    """Fused LSTM cell on a packed state ``hc = [h, c]`` of width ``2H``.

    Gate blocks in ``w_x``/``w_h``/``b`` are ordered [input, forget, output,
    candidate]. Returns the packed next state ``[h', c']``.
    """
    x, hc, w_x, w_h, b = (as_tensor(t) for t in (x, hc, w_x, w_h, b))
    H = w_h.shape[0]
    if hc.shape[-1] != 2 * H or w_h.shape[1] != 4 * H or w_x.shape[1] != 4 * H or x.shape[-1] != w_x.shape[0]:
        raise DimensionError(
            f"lstm_step: x {x.shape}, state {hc.shape}, w_x {w_x.shape}, w_h {w_h.shape} are inconsistent")
    xd, hd, cd = x.data, hc.data[..., :H], hc.data[..., H:]
    z = xd @ w_x.data + hd @ w_h.data + b.data
    ifo = _sigmoid(z[..., :3 * H])
    g = np.tanh(z[..., 3 * H:])
    i, f, o = ifo[..., :H], ifo[..., H:2 * H], ifo[..., 2 * H:]
    c_new = f * cd + i * g
    tc = np.tanh(c_new)
    h_new = o * tc

    def bw(grad):
        dh, dc = grad[..., :H], grad[..., H:]
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = np.concatenate([dc * g * i * (1.0 - i),
                             dc * cd * f * (1.0 - f),
                             dh * tc * o * (1.0 - o),
                             dc * i * (1.0 - g * g)], axis=-1)
        dx = dz @ w_x.data.T if x.requires_grad else None
        dhc = None
        if hc.requires_grad:
            dhc = np.concatenate([dz @ w_h.data.T, dc * f], axis=-1)
        dz2 = dz.reshape(-1, 4 * H)
        dwx = xd.reshape(-1, xd.shape[-1]).T @ dz2 if w_x.requires_grad else None
        dwh = hd.reshape(-1, H).T @ dz2 if w_h.requires_grad else None
        db = _unbroadcast(dz, b.shape) if b.requires_grad else None
        return dx, dhc, dwx, dwh, db

    return _make(np.concatenate([h_new, c_new], axis=-1), (x, hc, w_x, w_h, b), bw)
