"""Cubical sublevel filtrations of 2D images and their persistence.

V-construction: pixels are vertices, orthogonal neighbor pairs are edges,
2x2 pixel blocks are squares; edge and square values extend pixel values by
max.  H0 is paired by union-find over value-sorted edges, H1 by Z/2 column
reduction of the square boundary matrix (processing top dimension first
plays the role of the clearing optimization: edge columns whose pivots are
consumed by squares never need reducing).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..types import BACKGROUND, FAIL, WaferGrid
from .backend import kernel


@dataclass
class PersistenceDiagram:
    """Multiset of (birth, death) intervals for one homology dimension."""

    intervals: np.ndarray  # (n, 2) float64, death may be +inf
    dim: int

    def __len__(self) -> int:
        return self.intervals.shape[0]

    @property
    def persistences(self) -> np.ndarray:
        return self.intervals[:, 1] - self.intervals[:, 0]

    def finite(self) -> np.ndarray:
        return self.intervals[np.isfinite(self.intervals[:, 1])]


@dataclass
class CubicalFiltration:
    """Cell values of the V-construction over an (H, W) image."""

    vertex_values: np.ndarray  # (H, W)
    edge_u: np.ndarray  # (E,) flat vertex ids
    edge_v: np.ndarray
    edge_values: np.ndarray  # (E,)
    square_edges: np.ndarray  # (S, 4) edge ids
    square_values: np.ndarray  # (S,)

    @property
    def n_vertices(self) -> int:
        return self.vertex_values.size

    @property
    def n_edges(self) -> int:
        return self.edge_values.size

    @property
    def n_squares(self) -> int:
        return self.square_values.size


def build_filtration(image: np.ndarray) -> CubicalFiltration:
    """V-construction filtration of a gray image."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise ValueError("image must be a non-empty 2D array")
    h, w = image.shape
    idx = np.arange(h * w).reshape(h, w)

    # horizontal edges first, then vertical
    hu = idx[:, :-1].ravel()
    hv = idx[:, 1:].ravel()
    vu = idx[:-1, :].ravel()
    vv = idx[1:, :].ravel()
    edge_u = np.concatenate([hu, vu])
    edge_v = np.concatenate([hv, vv])
    flat = image.ravel()
    edge_values = np.maximum(flat[edge_u], flat[edge_v])

    # squares reference their 4 boundary edges: top/bottom horizontal,
    # left/right vertical
    n_h = h * (w - 1)
    hid = np.arange(n_h).reshape(h, w - 1)
    vid = n_h + np.arange((h - 1) * w).reshape(h - 1, w)
    if h > 1 and w > 1:
        top = hid[:-1, :].ravel()
        bottom = hid[1:, :].ravel()
        left = vid[:, :-1].ravel()
        right = vid[:, 1:].ravel()
        square_edges = np.stack([top, bottom, left, right], axis=1)
        square_values = edge_values[square_edges].max(axis=1)
    else:
        square_edges = np.empty((0, 4), dtype=np.int64)
        square_values = np.empty(0, dtype=np.float64)

    return CubicalFiltration(
        vertex_values=image,
        edge_u=edge_u.astype(np.int64),
        edge_v=edge_v.astype(np.int64),
        edge_values=edge_values,
        square_edges=square_edges.astype(np.int64),
        square_values=square_values,
    )


def compute_persistence(f: CubicalFiltration) -> tuple[PersistenceDiagram, PersistenceDiagram]:
    """Sublevel persistence pairing; zero-persistence pairs are dropped."""
    flat = f.vertex_values.ravel()

    edge_order = np.lexsort((np.arange(f.n_edges), f.edge_values))
    h0 = kernel.h0_merge_pairs(
        flat,
        f.edge_u[edge_order],
        f.edge_v[edge_order],
        f.edge_values[edge_order],
    )
    essential = np.array([[flat.min(), np.inf]]) if flat.size else np.empty((0, 2))
    h0 = np.vstack([h0, essential])

    if f.n_squares:
        edge_rank = np.empty(f.n_edges, dtype=np.int64)
        edge_rank[edge_order] = np.arange(f.n_edges)
        sq_order = np.lexsort((np.arange(f.n_squares), f.square_values))
        cols = np.sort(edge_rank[f.square_edges[sq_order]], axis=1)
        h1 = kernel.h1_reduction_pairs(
            np.ascontiguousarray(cols),
            f.square_values[sq_order],
            f.edge_values[edge_order],
        )
    else:
        h1 = np.empty((0, 2))

    h0 = h0[h0[:, 1] != h0[:, 0]]
    h1 = h1[h1[:, 1] != h1[:, 0]]
    return PersistenceDiagram(h0, dim=0), PersistenceDiagram(h1, dim=1)


def distance_filtration(grid: WaferGrid) -> np.ndarray:
    """Distance-to-defect image for a wafer grid, normalized to [0, 1].

    Exact Euclidean distance to the nearest fail cell, divided by the grid
    diagonal.  Off-wafer (background) cells are clamped to the maximum
    on-wafer distance so the far corners of the bounding square never
    dominate the filtration range.  A grid with no defects maps to the
    all-ones image.
    """
    grid.validate()
    cells = grid.cells
    defect = cells == FAIL
    if not defect.any():
        return np.ones(cells.shape, dtype=np.float64)
    dist = ndimage.distance_transform_edt(~defect)
    background = cells == BACKGROUND
    if background.any() and (~background).any():
        dist[background] = dist[~background].max()
    h, w = cells.shape
    return dist / float(np.hypot(w, h))


def tda_signature(item, mode: str = "sublevel") -> tuple[PersistenceDiagram, PersistenceDiagram]:
    """Diagram pair for one corpus item.

    ``sublevel`` expects a gray image; ``distance`` expects a WaferGrid and
    runs sublevel persistence on its distance-to-defect filtration.
    """
    if mode == "sublevel":
        if isinstance(item, WaferGrid):
            raise ValueError("sublevel mode expects a gray image, got a WaferGrid")
        image = item
    elif mode == "distance":
        if not isinstance(item, WaferGrid):
            raise ValueError("distance mode requires a WaferGrid")
        image = distance_filtration(item)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return compute_persistence(build_filtration(image))
