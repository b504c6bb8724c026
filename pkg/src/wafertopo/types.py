"""Shared lightweight data containers.

Images are plain numpy arrays by convention:
  - gray image: float64 array (H, W), values in [0, 1]
  - rgb image:  uint8 array (H, W, 3)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SWED_CLASSES = [
    "None",
    "Center",
    "Donut",
    "Edge-Loc",
    "Edge-Ring",
    "Loc",
    "Random",
    "Scratch",
    "Near-Full",
]

# cell states of a wafer grid
BACKGROUND = 0
PASS = 1
FAIL = 2


@dataclass
class WaferGrid:
    """Discrete 2D wafer map: 0 background, 1 pass, 2 fail."""

    cells: np.ndarray  # uint8 (H, W)
    class_label: str | None = None

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def validate(self) -> None:
        if self.cells.ndim != 2 or self.cells.size == 0:
            raise ValueError("grid must be a non-empty 2D array")
        if not np.isin(self.cells, [BACKGROUND, PASS, FAIL]).all():
            raise ValueError("grid values must be in {0, 1, 2}")


@dataclass
class CorpusItem:
    id: str
    image: np.ndarray  # gray image
    grid: WaferGrid | None = None
    label: str | None = None


@dataclass
class Corpus:
    items: list[CorpusItem]
    target_size: tuple[int, int]  # (w, h)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def ids(self) -> list[str]:
        return [it.id for it in self.items]

    @property
    def labels(self) -> list[str | None]:
        return [it.label for it in self.items]
