"""Fixed-length vectorizations of persistence diagrams.

Two schemes: persistence landscapes (default) and persistence images.
Infinite-death intervals are truncated at the top of the sampling range so
every vector is finite and of input-independent length.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .persist import PersistenceDiagram, tda_signature
from .types import Corpus

VARIANCE_FLOOR = 1e-8


@dataclass
class LandscapeParams:
    k_max: int = 3
    samples: int = 16
    t_min: float = 0.0
    t_max: float = 1.0

    def validate(self) -> None:
        if self.k_max <= 0 or self.samples <= 0:
            raise ValueError("k_max and samples must be positive")
        if not self.t_min < self.t_max:
            raise ValueError("need t_min < t_max")

    @property
    def length(self) -> int:
        return self.k_max * self.samples


@dataclass
class PersistenceImageParams:
    grid: tuple[int, int] = (8, 8)
    sigma: float | None = None  # default 0.05 of the range
    t_min: float = 0.0
    t_max: float = 1.0

    def validate(self) -> None:
        if self.grid[0] <= 0 or self.grid[1] <= 0:
            raise ValueError("grid must be positive")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not self.t_min < self.t_max:
            raise ValueError("need t_min < t_max")

    @property
    def length(self) -> int:
        return self.grid[0] * self.grid[1]

    def effective_sigma(self) -> float:
        return self.sigma if self.sigma is not None else 0.05 * (self.t_max - self.t_min)


def _clipped_intervals(diagram: PersistenceDiagram, t_max: float) -> np.ndarray:
    iv = diagram.intervals.copy()
    if iv.size:
        iv[:, 1] = np.minimum(iv[:, 1], t_max)
        iv = iv[iv[:, 1] > iv[:, 0]]
    return iv


def landscape(diagram: PersistenceDiagram, params: LandscapeParams) -> np.ndarray:
    """Sampled landscape levels 1..k_max concatenated; missing levels are 0."""
    params.validate()
    ts = np.linspace(params.t_min, params.t_max, params.samples)
    iv = _clipped_intervals(diagram, params.t_max)
    if iv.shape[0] == 0:
        return np.zeros(params.length)
    # tent functions: (n_intervals, samples)
    tents = np.maximum(
        0.0, np.minimum(ts[None, :] - iv[:, 0:1], iv[:, 1:2] - ts[None, :])
    )
    tents = -np.sort(-tents, axis=0)  # descending per sample point
    out = np.zeros((params.k_max, params.samples))
    k = min(params.k_max, tents.shape[0])
    out[:k] = tents[:k]
    return out.ravel()


def persistence_image(diagram: PersistenceDiagram, params: PersistenceImageParams) -> np.ndarray:
    """Weighted Gaussian density in (birth, persistence), midpoint-integrated."""
    params.validate()
    iv = _clipped_intervals(diagram, params.t_max)
    if iv.shape[0] == 0:
        return np.zeros(params.length)
    births = iv[:, 0]
    pers = iv[:, 1] - iv[:, 0]
    rows, cols = params.grid
    span = params.t_max - params.t_min
    bw = span / cols
    pw = span / rows
    bc = params.t_min + (np.arange(cols) + 0.5) * bw  # cell centers, birth axis
    pc = (np.arange(rows) + 0.5) * pw  # persistence axis from 0
    sigma = params.effective_sigma()
    norm = 1.0 / (2.0 * np.pi * sigma**2)
    gb = np.exp(-0.5 * ((bc[None, :] - births[:, None]) / sigma) ** 2)  # (n, cols)
    gp = np.exp(-0.5 * ((pc[None, :] - pers[:, None]) / sigma) ** 2)  # (n, rows)
    img = np.einsum("n,nr,nc->rc", pers * norm, gp, gb) * (bw * pw)
    return img.ravel()


def vectorize_pair(
    diagrams: tuple[PersistenceDiagram, PersistenceDiagram],
    scheme: str,
    params,
) -> np.ndarray:
    fn = {"landscape": landscape, "pimage": persistence_image}.get(scheme)
    if fn is None:
        raise ValueError(f"unknown scheme {scheme!r}")
    return np.concatenate([fn(diagrams[0], params), fn(diagrams[1], params)])


@dataclass
class FeatureSet:
    ids: list[str]
    values: np.ndarray  # (N, D) standardized
    scheme: str
    mode: str
    params_echo: dict = field(default_factory=dict)


def featurize_corpus(
    corpus: Corpus,
    mode: str = "sublevel",
    scheme: str = "landscape",
    params=None,
) -> FeatureSet:
    """One standardized TDA feature row per corpus item.

    The sampling range is fixed per corpus to [0, max filtration value
    observed] and echoed in the result for reproducibility.
    """
    if len(corpus) == 0:
        return FeatureSet(ids=[], values=np.empty((0, 0)), scheme=scheme, mode=mode)

    diagrams = []
    t_max = 0.0
    for it in corpus.items:
        item = it.grid if mode == "distance" else it.image
        d0, d1 = tda_signature(item, mode)
        for d in (d0, d1):
            fin = d.finite()
            if fin.size:
                t_max = max(t_max, float(fin[:, 1].max()))
            if d.intervals.size:
                t_max = max(t_max, float(d.intervals[:, 0].max()))
        diagrams.append((d0, d1))
    if t_max <= 0.0:
        t_max = 1.0

    if params is None:
        params = LandscapeParams() if scheme == "landscape" else PersistenceImageParams()
    params.t_min = 0.0
    params.t_max = t_max

    rows = np.stack([vectorize_pair(d, scheme, params) for d in diagrams])
    mean = rows.mean(axis=0)
    var = np.maximum(rows.var(axis=0), VARIANCE_FLOOR)
    rows = (rows - mean) / np.sqrt(var)
    echo = {"scheme": scheme, "mode": mode, "t_min": 0.0, "t_max": t_max}
    if scheme == "landscape":
        echo.update(k_max=params.k_max, samples=params.samples)
    else:
        echo.update(grid=list(params.grid), sigma=params.effective_sigma())
    return FeatureSet(ids=corpus.ids, values=rows, scheme=scheme, mode=mode, params_echo=echo)


def save_features(feats: FeatureSet, path) -> None:
    """npz dump of a FeatureSet (ids, standardized rows, parameter echo)."""
    import json

    # write through a file handle so numpy never appends an extension
    with open(path, "wb") as f:
        np.savez(
            f,
            ids=np.array(feats.ids),
            values=feats.values,
            scheme=feats.scheme,
            mode=feats.mode,
            echo=json.dumps(feats.params_echo, sort_keys=True),
        )


def load_features(path) -> FeatureSet:
    import json

    data = np.load(path, allow_pickle=False)
    return FeatureSet(
        ids=[str(s) for s in data["ids"]],
        values=data["values"],
        scheme=str(data["scheme"]),
        mode=str(data["mode"]),
        params_echo=json.loads(str(data["echo"])),
    )
