"""Binary formats for embeddings (WTE1) and checkpoints (WTK1).

Both are little-endian, versioned, and fail loudly on magic/version
mismatch or truncation.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoder import EncoderParams

EMB_MAGIC = b"WTE1"
CKPT_MAGIC = b"WTK1"
FORMAT_VERSION = 1


@dataclass
class EmbeddingMatrix:
    ids: list[str]
    rows: np.ndarray  # (N, D), row-L2-normalized

    def __post_init__(self):
        if self.rows.ndim != 2 or len(self.ids) != self.rows.shape[0]:
            raise ValueError("ids and rows are misaligned")

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class ModelCheckpoint:
    params: EncoderParams
    meta: dict = field(default_factory=dict)  # params echo + training provenance
    version: int = FORMAT_VERSION


def _read_exact(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise ValueError("truncated file")
    return buf


def export_embeddings(emb: EmbeddingMatrix, path: str | Path) -> None:
    n, d = emb.rows.shape
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<IQI", FORMAT_VERSION, n, d))
        for ident in emb.ids:
            raw = ident.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
        f.write(emb.rows.astype("<f4").tobytes())


def import_embeddings(path: str | Path) -> EmbeddingMatrix:
    with open(path, "rb") as f:
        if _read_exact(f, 4) != EMB_MAGIC:
            raise ValueError("bad embedding file magic")
        version, n, d = struct.unpack("<IQI", _read_exact(f, 16))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported embedding format version {version}")
        ids = []
        for _ in range(n):
            (ln,) = struct.unpack("<I", _read_exact(f, 4))
            ids.append(_read_exact(f, ln).decode("utf-8"))
        rows = np.frombuffer(_read_exact(f, 4 * n * d), dtype="<f4").reshape(n, d).astype(np.float64)
        if f.read(1):
            raise ValueError("trailing bytes in embedding file")
    return EmbeddingMatrix(ids=ids, rows=rows)


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path) -> None:
    meta = dict(ckpt.meta)
    meta["arch"] = {
        "widths": list(ckpt.params.widths),
        "head_hidden": ckpt.params.head_hidden,
        "embed_dim": ckpt.params.embed_dim,
        "tda_dim": ckpt.params.tda_dim,
    }
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(ckpt.params.weights)))
        for name in sorted(ckpt.params.weights):
            w = ckpt.params.weights[name]
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", w.ndim))
            f.write(struct.pack(f"<{w.ndim}I", *w.shape))
            f.write(w.astype("<f4").tobytes())
        payload = json.dumps(meta, sort_keys=True).encode("utf-8")
        f.write(struct.pack("<I", len(payload)))
        f.write(payload)


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    with open(path, "rb") as f:
        if _read_exact(f, 4) != CKPT_MAGIC:
            raise ValueError("bad checkpoint magic")
        version, n_tensors = struct.unpack("<II", _read_exact(f, 8))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        weights = {}
        for _ in range(n_tensors):
            (ln,) = struct.unpack("<I", _read_exact(f, 4))
            name = _read_exact(f, ln).decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(f, 4))
            shape = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim))
            count = int(np.prod(shape)) if ndim else 1
            weights[name] = (
                np.frombuffer(_read_exact(f, 4 * count), dtype="<f4").reshape(shape).astype(np.float64)
            )
        (ln,) = struct.unpack("<I", _read_exact(f, 4))
        meta = json.loads(_read_exact(f, ln).decode("utf-8"))
        if f.read(1):
            raise ValueError("trailing bytes in checkpoint file")
    arch = meta.pop("arch")
    params = EncoderParams(
        widths=tuple(arch["widths"]),
        head_hidden=arch["head_hidden"],
        embed_dim=arch["embed_dim"],
        tda_dim=arch["tda_dim"],
        weights=weights,
    )
    return ModelCheckpoint(params=params, meta=meta, version=version)
