"""Corpus ingestion: PNG decoding, grayscale conversion, resizing, caching.

The in-memory corpus holds one grayscale image per manifest entry, all at a
common target size.  SWED-style renders can additionally be decoded back to
their discrete wafer grids via the fixed palette.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .manifest import DatasetManifest
from .types import Corpus, CorpusItem, WaferGrid

# Rec.601 luminance
LUMA = np.array([0.299, 0.587, 0.114])

CACHE_MAGIC = b"WTC1"
CACHE_VERSION = 1


@dataclass
class IngestError:
    id: str
    message: str


def resize(image: np.ndarray, target: tuple[int, int], mode: str = "bilinear") -> np.ndarray:
    """Resize a gray image to (w, h); nearest preserves the input value set."""
    tw, th = target
    if tw <= 0 or th <= 0:
        raise ValueError("target size must be positive")
    sh, sw = image.shape
    if (sw, sh) == (tw, th):
        return image.copy()
    if mode == "nearest":
        ys = np.minimum((np.arange(th) + 0.5) * sh / th, sh - 1).astype(int)
        xs = np.minimum((np.arange(tw) + 0.5) * sw / tw, sw - 1).astype(int)
        return image[np.ix_(ys, xs)]
    if mode == "bilinear":
        # edge-clamped sampling at pixel centers
        ys = np.clip((np.arange(th) + 0.5) * sh / th - 0.5, 0, sh - 1)
        xs = np.clip((np.arange(tw) + 0.5) * sw / tw - 0.5, 0, sw - 1)
        y0 = np.floor(ys).astype(int)
        x0 = np.floor(xs).astype(int)
        y1 = np.minimum(y0 + 1, sh - 1)
        x1 = np.minimum(x0 + 1, sw - 1)
        wy = (ys - y0)[:, None]
        wx = (xs - x0)[None, :]
        a = image[np.ix_(y0, x0)]
        b = image[np.ix_(y0, x1)]
        c = image[np.ix_(y1, x0)]
        d = image[np.ix_(y1, x1)]
        return (a * (1 - wy) * (1 - wx) + b * (1 - wy) * wx + c * wy * (1 - wx) + d * wy * wx)
    raise ValueError(f"unknown resize mode {mode!r}")


def to_gray(rgb: np.ndarray) -> np.ndarray:
    """uint8 RGB -> luminance gray in [0, 1]."""
    return (rgb.astype(np.float64) @ LUMA) / 255.0


def grid_from_colors(rgb: np.ndarray, palette: np.ndarray, tolerance: int = 8) -> WaferGrid:
    """Inverse of a palette render: map each pixel to its palette index."""
    diffs = np.abs(rgb[:, :, None, :].astype(int) - palette[None, None, :, :].astype(int))
    worst = diffs.max(axis=3)  # per-channel max deviation per candidate
    best = worst.argmin(axis=2)
    off = worst.min(axis=2) > tolerance
    if off.any():
        y, x = np.argwhere(off)[0]
        raise ValueError(f"off-palette pixel at (x={x}, y={y}): {tuple(rgb[y, x])}")
    return WaferGrid(cells=best.astype(np.uint8))


def load_corpus(
    manifest: DatasetManifest,
    target_size: tuple[int, int],
    mode: str = "bilinear",
    decode_grids: bool = False,
    palette: np.ndarray | None = None,
) -> tuple[Corpus, list[IngestError]]:
    """Load every manifest entry; unreadable items are reported, not fatal."""
    tw, th = target_size
    if tw <= 0 or th <= 0:
        raise ValueError("target size must be positive")
    items: list[CorpusItem] = []
    errors: list[IngestError] = []
    for e in manifest.entries:
        try:
            with Image.open(manifest.resolve(e)) as im:
                rgb = np.asarray(im.convert("RGB"))
            grid = None
            if decode_grids:
                if palette is None:
                    raise ValueError("decode_grids requires a palette")
                grid = grid_from_colors(rgb, palette)
                if grid.cells.shape != (th, tw):
                    grid = WaferGrid(
                        cells=resize(grid.cells.astype(np.float64), target_size, "nearest").astype(np.uint8),
                        class_label=grid.class_label,
                    )
                grid.class_label = e.label or None
            gray = resize(to_gray(rgb), target_size, mode)
            items.append(CorpusItem(id=e.id, image=gray, grid=grid, label=e.label or None))
        except (OSError, ValueError) as exc:
            errors.append(IngestError(id=e.id, message=str(exc)))
    return Corpus(items=items, target_size=(tw, th)), errors


def save_corpus_cache(corpus: Corpus, path: str | Path) -> None:
    """Versioned little-endian binary cache (magic WTC1)."""
    tw, th = corpus.target_size
    with open(path, "wb") as f:
        f.write(CACHE_MAGIC)
        f.write(struct.pack("<IIIQ", CACHE_VERSION, tw, th, len(corpus.items)))
        for it in corpus.items:
            ident = it.id.encode("utf-8")
            label = (it.label or "").encode("utf-8")
            f.write(struct.pack("<I", len(ident)))
            f.write(ident)
            f.write(struct.pack("<I", len(label)))
            f.write(label)
            f.write(it.image.astype("<f4").tobytes())
            if it.grid is not None:
                gh, gw = it.grid.cells.shape
                f.write(struct.pack("<BII", 1, gw, gh))
                f.write(it.grid.cells.tobytes())
            else:
                f.write(struct.pack("<BII", 0, 0, 0))


def _read_exact(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise ValueError(f"truncated corpus cache: wanted {n} bytes, got {len(buf)}")
    return buf


def load_corpus_cache(path: str | Path) -> Corpus:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CACHE_MAGIC:
            raise ValueError(f"bad corpus cache magic {magic!r}")
        version, tw, th, n = struct.unpack("<IIIQ", _read_exact(f, 20))
        if version != CACHE_VERSION:
            raise ValueError(f"unsupported corpus cache version {version}")
        items = []
        for _ in range(n):
            (id_len,) = struct.unpack("<I", _read_exact(f, 4))
            ident = _read_exact(f, id_len).decode("utf-8")
            (label_len,) = struct.unpack("<I", _read_exact(f, 4))
            label = _read_exact(f, label_len).decode("utf-8") or None
            img = np.frombuffer(_read_exact(f, 4 * tw * th), dtype="<f4").reshape(th, tw).astype(np.float64)
            has_grid, gw, gh = struct.unpack("<BII", _read_exact(f, 9))
            grid = None
            if has_grid:
                cells = np.frombuffer(_read_exact(f, gw * gh), dtype=np.uint8).reshape(gh, gw).copy()
                grid = WaferGrid(cells=cells, class_label=label)
            items.append(CorpusItem(id=ident, image=img, grid=grid, label=label))
    return Corpus(items=items, target_size=(tw, th))
