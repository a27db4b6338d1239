"""On-disk formats: JSON parameter checkpoints and the binary embedding file."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .numerics import Tensor

FORMAT = "stdgi-checkpoint"
EMB_MAGIC = b"STDGIEMB"
EMB_VERSION = 1


def save_tensors(path, kind: str, tensors: dict[str, Tensor | np.ndarray], meta: dict | None = None) -> None:
    """Write named tensors as ``{"shape": [...], "values": [...]}`` entries."""
    body = {"format": FORMAT, "version": 1, "kind": kind, "meta": meta or {}, "tensors": {}}
    for name, t in tensors.items():
        arr = np.asarray(t.data if isinstance(t, Tensor) else t, dtype=np.float64)
        body["tensors"][name] = {"shape": list(arr.shape), "values": arr.reshape(-1).tolist()}
    Path(path).write_text(json.dumps(body, sort_keys=True) + "\n")


def load_tensors(path, kind: str | None = None) -> tuple[dict[str, np.ndarray], dict]:
    try:
        body = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from None
    if body.get("format") != FORMAT:
        raise ValidationError(f"{path}: not a {FORMAT} file")
    if kind is not None and body.get("kind") != kind:
        raise ValidationError(f"{path}: expected a {kind!r} checkpoint, found {body.get('kind')!r}")
    out = {}
    for name, entry in body["tensors"].items():
        values = np.asarray(entry["values"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if values.size != int(np.prod(shape)):
            raise ValidationError(f"{path}: tensor {name} has {values.size} values for shape {shape}")
        out[name] = values.reshape(shape)
    return out, body.get("meta", {})


def write_embeddings(path, emb: np.ndarray) -> None:
    """Magic, version, ndim, dims (little-endian uint32/uint64), then float64 payload."""
    arr = np.ascontiguousarray(emb, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<II", EMB_VERSION, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes())


def read_embeddings_header(path) -> tuple[int, ...]:
    with open(path, "rb") as fh:
        return _header(fh, path)


def _header(fh, path) -> tuple[int, ...]:
    if fh.read(len(EMB_MAGIC)) != EMB_MAGIC:
        raise ValidationError(f"{path}: not an embeddings file")
    version, ndim = struct.unpack("<II", fh.read(8))
    if version != EMB_VERSION:
        raise ValidationError(f"{path}: unsupported embeddings version {version}")
    return struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))


def read_embeddings(path) -> np.ndarray:
    with open(path, "rb") as fh:
        shape = _header(fh, path)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != int(np.prod(shape)):
        raise ValidationError(f"{path}: payload has {data.size} values, header says {shape}")
    return data.reshape(shape).astype(np.float64)
