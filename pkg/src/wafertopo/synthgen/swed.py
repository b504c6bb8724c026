"""Procedural generator for the SWED synthetic wafer-map dataset.

Nine classes mimicking the WM811K taxonomy, drawn on a 128x128 discrete
grid (0 background, 1 pass, 2 fail) and rendered with a fixed 3-color map.
"""
from __future__ import annotations

import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage
from skimage.draw import line_aa

from ..manifest import DatasetManifest, ManifestEntry, write_manifest
from ..rng import STREAM_BASE, STREAM_NOISE, item_seed, make_rng
from ..types import BACKGROUND, FAIL, PASS, SWED_CLASSES, WaferGrid

# 0 background, 1 pass, 2 fail
SWED_PALETTE = np.array(
    [
        [0x44, 0x01, 0x54],  # #440154
        [0x21, 0x91, 0x8C],  # #21918c
        [0xFD, 0xE7, 0x25],  # #fde725
    ],
    dtype=np.uint8,
)


@dataclass
class SwedConfig:
    per_class_count: int = 200
    grid_px: int = 128
    wafer_radius_fraction: float = 0.94
    seed: int = 0

    def validate(self) -> None:
        if self.per_class_count < 0:
            raise ValueError("per_class_count must be >= 0")
        if self.grid_px <= 0:
            raise ValueError("grid_px must be positive")
        if not 0.0 < self.wafer_radius_fraction <= 1.0:
            raise ValueError("wafer_radius_fraction must be in (0, 1]")


def _geometry(config: SwedConfig):
    n = config.grid_px
    c = (n - 1) / 2.0
    radius = config.wafer_radius_fraction * (n / 2.0)
    yy, xx = np.mgrid[0:n, 0:n]
    dist = np.hypot(yy - c, xx - c)
    return c, radius, dist


def _sprinkle(cells, region, density, rng) -> None:
    hit = region & (cells == PASS) & (rng.random(cells.shape) < density)
    cells[hit] = FAIL


def _scratch(cells, wafer, c, radius, rng) -> None:
    n_lines = int(rng.integers(1, 3))
    for _ in range(n_lines):
        length = rng.uniform(40.0, 100.0)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        mr = rng.uniform(0.0, 0.6 * radius)
        ma = rng.uniform(0.0, 2.0 * np.pi)
        my, mx = c + mr * np.sin(ma), c + mr * np.cos(ma)
        half = length / 2.0
        r0, c0 = int(round(my - half * np.sin(angle))), int(round(mx - half * np.cos(angle)))
        r1, c1 = int(round(my + half * np.sin(angle))), int(round(mx + half * np.cos(angle)))
        nmax = cells.shape[0] - 1
        r0, c0, r1, c1 = (int(np.clip(v, 0, nmax)) for v in (r0, c0, r1, c1))
        rr, cc, val = line_aa(r0, c0, r1, c1)
        mask = np.zeros_like(cells, dtype=bool)
        mask[rr[val > 0.3], cc[val > 0.3]] = True
        mask = ndimage.binary_dilation(mask, iterations=1)
        cells[mask & wafer] = FAIL


def gen_swed_grid(class_label: str, seed: int, config: SwedConfig | None = None) -> WaferGrid:
    """Generate one wafer grid for the given class."""
    config = config or SwedConfig()
    config.validate()
    if class_label not in SWED_CLASSES:
        raise ValueError(f"unknown SWED class {class_label!r}")
    rng = make_rng(seed, STREAM_BASE)
    noise_rng = make_rng(seed, STREAM_NOISE)

    c, radius, dist = _geometry(config)
    wafer = dist <= radius
    cells = np.where(wafer, PASS, BACKGROUND).astype(np.uint8)

    # region the sparse noise must avoid, so ring-type classes keep their hole
    noise_keepout = np.zeros_like(wafer)

    if class_label == "None":
        pass
    elif class_label == "Center":
        r = rng.uniform(8.0, 18.0)
        density = rng.uniform(0.7, 1.0)
        _sprinkle(cells, dist <= r, density, rng)
    elif class_label == "Donut":
        inner = rng.uniform(20.0, 26.0)
        width = rng.uniform(8.0, 12.0)
        density = rng.uniform(0.75, 1.0)
        _sprinkle(cells, (dist >= inner) & (dist <= inner + width), density, rng)
        noise_keepout = dist < inner
    elif class_label == "Edge-Ring":
        outer = rng.uniform(0.97, 1.0) * radius
        width = rng.uniform(3.0, 6.0)
        density = rng.uniform(0.8, 1.0)
        _sprinkle(cells, (dist >= outer - width) & (dist <= outer), density, rng)
        noise_keepout = dist < outer - width
    elif class_label == "Edge-Loc":
        span = np.deg2rad(rng.uniform(20.0, 70.0))
        start = rng.uniform(0.0, 2.0 * np.pi)
        density = rng.uniform(0.7, 1.0)
        yy, xx = np.mgrid[0 : cells.shape[0], 0 : cells.shape[1]]
        theta = np.mod(np.arctan2(yy - c, xx - c) - start, 2.0 * np.pi)
        band = (dist >= 0.85 * radius) & (dist <= radius) & (theta <= span)
        _sprinkle(cells, band, density, rng)
    elif class_label == "Loc":
        r = rng.uniform(5.0, 12.0)
        pr = rng.uniform(0.2, 0.7) * radius
        pa = rng.uniform(0.0, 2.0 * np.pi)
        py, px = c + pr * np.sin(pa), c + pr * np.cos(pa)
        yy, xx = np.mgrid[0 : cells.shape[0], 0 : cells.shape[1]]
        density = rng.uniform(0.7, 1.0)
        _sprinkle(cells, np.hypot(yy - py, xx - px) <= r, density, rng)
    elif class_label == "Random":
        density = rng.uniform(0.05, 0.15)
        _sprinkle(cells, wafer, density, rng)
    elif class_label == "Scratch":
        _scratch(cells, wafer, c, radius, rng)
    elif class_label == "Near-Full":
        density = rng.uniform(0.6, 0.9)
        _sprinkle(cells, wafer, density, rng)

    if class_label != "None":
        n_noise = int(noise_rng.integers(0, 16))
        allowed = np.argwhere(wafer & ~noise_keepout & (cells == PASS))
        if len(allowed) and n_noise:
            picks = allowed[noise_rng.integers(0, len(allowed), size=n_noise)]
            cells[picks[:, 0], picks[:, 1]] = FAIL

    return WaferGrid(cells=cells, class_label=class_label)


def render_swed(grid: WaferGrid, scale: int = 1) -> np.ndarray:
    """Render a grid with the fixed 3-color map, one pixel block per cell."""
    grid.validate()
    rgb = SWED_PALETTE[grid.cells]
    if scale > 1:
        rgb = np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)
    return rgb


def gen_swed_dataset(config: SwedConfig, out_dir: str | Path) -> DatasetManifest:
    """Write per_class_count images for each of the 9 classes plus a manifest."""
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries: list[ManifestEntry] = []
    written: list[Path] = []
    try:
        idx = 0
        for class_label in SWED_CLASSES:
            for i in range(config.per_class_count):
                grid = gen_swed_grid(class_label, item_seed(config.seed, idx), config)
                rgb = render_swed(grid)
                slug = class_label.lower().replace("-", "_")
                name = f"swed_{slug}_{i:04d}.png"
                path = out_dir / name
                Image.fromarray(rgb).save(path)
                written.append(path)
                entries.append(ManifestEntry(id=f"swed_{slug}_{i:04d}", path=name, label=class_label))
                idx += 1
        manifest = DatasetManifest(entries=entries, root=out_dir)
        write_manifest(manifest, out_dir / "manifest.csv")
    except OSError:
        for p in written:
            p.unlink(missing_ok=True)
        shutil.rmtree(out_dir, ignore_errors=True)
        raise
    return manifest
