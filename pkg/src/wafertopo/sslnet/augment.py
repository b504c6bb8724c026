"""Stochastic augmentations for contrastive view generation.

Applied in order: horizontal flip (p=0.5), vertical flip (p=0.5), rotation
by a uniform angle with nearest-neighbor resampling and constant fill,
optional random crop resized back to the input size.  Output dimensions
always equal input dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ingest import resize


@dataclass
class AugmentationSpec:
    h_flip: bool = True
    v_flip: bool = True
    rotation_deg: tuple[float, float] = (0.0, 45.0)
    crop_min_area_fraction: float | None = None
    fill_value: float = 0.0

    def validate(self) -> None:
        lo, hi = self.rotation_deg
        if lo > hi:
            raise ValueError("rotation range must satisfy lo <= hi")
        if self.crop_min_area_fraction is not None and not 0.0 < self.crop_min_area_fraction <= 1.0:
            raise ValueError("crop_min_area_fraction must be in (0, 1]")


def rotate_nearest(image: np.ndarray, angle_deg: float, fill_value: float = 0.0) -> np.ndarray:
    """Rotate about the image center, nearest-neighbor, constant fill."""
    if angle_deg == 0.0:
        return image.copy()
    h, w = image.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    yy, xx = np.mgrid[0:h, 0:w]
    dy, dx = yy - cy, xx - cx
    # inverse map: rotate destination coords by -theta
    sx = np.round(cos_t * dx + sin_t * dy + cx).astype(int)
    sy = np.round(-sin_t * dx + cos_t * dy + cy).astype(int)
    valid = (sx >= 0) & (sx < w) & (sy >= 0) & (sy < h)
    out = np.full_like(image, fill_value)
    out[valid] = image[sy[valid], sx[valid]]
    return out


def augment(image: np.ndarray, spec: AugmentationSpec, rng: np.random.Generator) -> np.ndarray:
    spec.validate()
    out = image
    if spec.h_flip and rng.random() < 0.5:
        out = out[:, ::-1]
    if spec.v_flip and rng.random() < 0.5:
        out = out[::-1, :]
    lo, hi = spec.rotation_deg
    if hi > lo or lo != 0.0:
        angle = rng.uniform(lo, hi) if hi > lo else lo
        out = rotate_nearest(np.ascontiguousarray(out), angle, spec.fill_value)
    if spec.crop_min_area_fraction is not None:
        h, w = out.shape
        frac = rng.uniform(spec.crop_min_area_fraction, 1.0)
        side = np.sqrt(frac)
        ch, cw = max(1, int(round(side * h))), max(1, int(round(side * w)))
        y0 = int(rng.integers(0, h - ch + 1))
        x0 = int(rng.integers(0, w - cw + 1))
        out = resize(np.ascontiguousarray(out[y0 : y0 + ch, x0 : x0 + cw]), (w, h), "bilinear")
    return np.ascontiguousarray(out)
