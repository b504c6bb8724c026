"""Procedural generator for the SPVD synthetic dataset.

Each image is built in stages on a grey 400x400 canvas: concentric rings
with perturbation circles, a heavily blurred texture mask blended on top,
optional stroke defects near the periphery ("faulty" class), inversion,
a strong final blur, JET colorization, and a circular black mask.

Each stage draws from its own RNG stream, so a good/faulty pair sharing a
seed differs only inside the defect annulus.
"""
from __future__ import annotations

import shutil
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from ..manifest import DatasetManifest, ManifestEntry, write_manifest
from ..rng import STREAM_BASE, STREAM_DEFECT, STREAM_TEXTURE, item_seed, make_rng

GREY = 128
RING_RADIUS = (30, 200)
RING_THICKNESS = (4, 10)
BLEND_RING_WEIGHT = 0.7
STROKE_THICKNESS = 2


@dataclass
class SpvdConfig:
    image_count: int = 200
    faulty_fraction: float = 0.5
    canvas_px: int = 400
    mask_radius_px: int = 200
    seed: int = 0

    def validate(self) -> None:
        if self.image_count < 0:
            raise ValueError("image_count must be >= 0")
        if not 0.0 <= self.faulty_fraction <= 1.0:
            raise ValueError("faulty_fraction must be in [0, 1]")
        if self.canvas_px < 2 * self.mask_radius_px:
            raise ValueError("canvas_px must be >= 2 * mask_radius_px")


def _draw_rings(img: np.ndarray, rng: np.random.Generator, n_max: int) -> None:
    center = (img.shape[1] // 2, img.shape[0] // 2)
    n = int(rng.integers(0, n_max + 1))
    for _ in range(n):
        radius = int(rng.integers(RING_RADIUS[0], RING_RADIUS[1] + 1))
        thickness = int(rng.integers(RING_THICKNESS[0], RING_THICKNESS[1] + 1))
        color = int(rng.choice([0, 255]))
        cv2.circle(img, center, radius, color, thickness)
        # two slightly offset grey circles roughen the ring edges
        for _ in range(2):
            dx = int(rng.integers(-3, 4))
            dy = int(rng.integers(-3, 4))
            cv2.circle(img, (center[0] + dx, center[1] + dy), radius, GREY, thickness)


def _texture_mask(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    tex = np.full(shape, GREY, dtype=np.uint8)
    center = (shape[1] // 2, shape[0] // 2)
    n_rings = int(rng.integers(0, 6))
    for _ in range(n_rings):
        radius = int(rng.integers(RING_RADIUS[0], RING_RADIUS[1] + 1))
        thickness = int(rng.integers(RING_THICKNESS[0], RING_THICKNESS[1] + 1))
        color = int(rng.choice([0, 255]))
        cv2.circle(tex, center, radius, color, thickness)
    n_lines = int(rng.integers(0, 9))
    for _ in range(n_lines):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        color = int(rng.choice([0, 255]))
        end = (
            int(round(center[0] + 200 * np.cos(angle))),
            int(round(center[1] + 200 * np.sin(angle))),
        )
        cv2.line(tex, center, end, color, 2)
    return cv2.GaussianBlur(tex, (65, 65), 0)


def _stroke_layer(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Dark radial stroke defects near the periphery, lightly blurred."""
    layer = np.zeros(shape, dtype=np.uint8)
    center = (shape[1] // 2, shape[0] // 2)
    n = int(rng.integers(1, 6))
    for _ in range(n):
        r0 = rng.uniform(160.0, 180.0)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        length = rng.uniform(5.0, 20.0)
        cx, cy = np.cos(angle), np.sin(angle)
        p1 = (int(round(center[0] + r0 * cx)), int(round(center[1] + r0 * cy)))
        p2 = (
            int(round(center[0] + (r0 + length) * cx)),
            int(round(center[1] + (r0 + length) * cy)),
        )
        cv2.line(layer, p1, p2, 255, STROKE_THICKNESS)
    return cv2.GaussianBlur(layer, (3, 3), 0)


def gen_spvd_image(seed: int, is_faulty: bool, config: SpvdConfig | None = None) -> np.ndarray:
    """Render one SPVD image as an RGB uint8 array."""
    config = config or SpvdConfig()
    config.validate()
    n = config.canvas_px

    base = np.full((n, n), GREY, dtype=np.uint8)
    _draw_rings(base, make_rng(seed, STREAM_BASE), n_max=4)
    tex = _texture_mask((n, n), make_rng(seed, STREAM_TEXTURE))
    img = cv2.addWeighted(base, BLEND_RING_WEIGHT, tex, 1.0 - BLEND_RING_WEIGHT, 0.0)

    if is_faulty:
        strokes = _stroke_layer((n, n), make_rng(seed, STREAM_DEFECT))
        img = cv2.subtract(img, strokes)

    img = cv2.bitwise_not(img)  # 255 - v
    img = cv2.GaussianBlur(img, (25, 25), 0)
    bgr = cv2.applyColorMap(img, cv2.COLORMAP_JET)
    rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)

    c = n // 2
    yy, xx = np.mgrid[0:n, 0:n]
    outside = (xx - c) ** 2 + (yy - c) ** 2 > config.mask_radius_px**2
    rgb[outside] = 0
    return rgb


def gen_spvd_dataset(config: SpvdConfig, out_dir: str | Path) -> DatasetManifest:
    """Write the SPVD image set plus a manifest CSV; good images come first."""
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_faulty = int(np.floor(config.image_count * config.faulty_fraction))
    n_good = config.image_count - n_faulty

    entries: list[ManifestEntry] = []
    written: list[Path] = []
    try:
        for i in range(config.image_count):
            is_faulty = i >= n_good
            label = "faulty" if is_faulty else "good"
            rgb = gen_spvd_image(item_seed(config.seed, i), is_faulty, config)
            name = f"spvd_{i:04d}.png"
            path = out_dir / name
            Image.fromarray(rgb).save(path)
            written.append(path)
            entries.append(ManifestEntry(id=f"spvd_{i:04d}", path=name, label=label))
        manifest = DatasetManifest(entries=entries, root=out_dir)
        write_manifest(manifest, out_dir / "manifest.csv")
    except OSError:
        for p in written:
            p.unlink(missing_ok=True)
        shutil.rmtree(out_dir, ignore_errors=True)
        raise
    return manifest
