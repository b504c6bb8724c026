"""Mapper-style TDA map over embeddings, grid search, cluster extraction.

Lens: top-2 classical MDS of the pairwise distance matrix (landmark variant
above 2000 items).  Cover: overlapping rectangular bins in the lens plane.
Within each bin, single-linkage clusters cut at beta times the global
median 1-NN distance become nodes; nodes sharing items are connected.
Clusters are connected components of the node graph after dropping small
nodes; leftover items go to NOISE.  Maps are ranked by a Davies-Bouldin
score plus the noise fraction (lower is better).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .sslnet.io import EmbeddingMatrix

NOISE = -1
LANDMARK_THRESHOLD = 2000
N_LANDMARKS = 256


@dataclass
class TdaMapConfig:
    beta: float = 3.5
    metric: str = "euclidean"  # euclidean | cosine
    lens_bins: int = 10
    overlap: float = 0.3
    min_node_size: int = 3
    min_cluster_fraction: float = 0.005

    def validate(self) -> None:
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.metric not in ("euclidean", "cosine"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.lens_bins <= 0:
            raise ValueError("lens_bins must be positive")
        if not 0.0 < self.overlap < 0.5:
            raise ValueError("overlap must be in (0, 0.5)")
        if self.min_node_size <= 0:
            raise ValueError("min_node_size must be positive")

    def echo(self) -> dict:
        return {
            "beta": self.beta,
            "metric": self.metric,
            "lens_bins": self.lens_bins,
            "overlap": self.overlap,
            "min_node_size": self.min_node_size,
            "min_cluster_fraction": self.min_cluster_fraction,
        }


@dataclass
class MapNode:
    node_id: int
    members: list[int]  # item indices
    centroid: np.ndarray


@dataclass
class TdaMap:
    nodes: list[MapNode]
    edges: list[tuple[int, int, int]]  # (node_a, node_b, shared_count)
    lens: np.ndarray  # (N, 2)
    config: TdaMapConfig
    ids: list[str]
    assignments: np.ndarray | None = None  # per item cluster id, NOISE = -1


def pairwise_distance(emb: EmbeddingMatrix, metric: str) -> np.ndarray:
    """Full symmetric distance matrix with zero diagonal."""
    x = emb.rows
    if x.shape[0] < 1:
        raise ValueError("need at least one row")
    if metric == "euclidean":
        sq = (x * x).sum(axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
        d = np.sqrt(d2)
    elif metric == "cosine":
        norms = np.linalg.norm(x, axis=1)
        if (norms == 0).any():
            raise ValueError("zero-norm row under cosine metric")
        xn = x / norms[:, None]
        d = np.clip(1.0 - xn @ xn.T, 0.0, 2.0)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    np.fill_diagonal(d, 0.0)
    return (d + d.T) / 2.0


def _classical_mds_2d(d: np.ndarray) -> np.ndarray:
    n = d.shape[0]
    d2 = d**2
    j = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * j @ d2 @ j
    vals, vecs = np.linalg.eigh(b)
    order = np.argsort(vals)[::-1][:2]
    coords = np.zeros((n, 2))
    for axis, k in enumerate(order):
        lam = max(vals[k], 0.0)
        coords[:, axis] = vecs[:, k] * np.sqrt(lam)
    return coords


def _landmark_mds_2d(d: np.ndarray, n_landmarks: int) -> np.ndarray:
    n = d.shape[0]
    landmarks = np.unique(np.linspace(0, n - 1, n_landmarks).astype(int))
    dl = d[np.ix_(landmarks, landmarks)]
    m = len(landmarks)
    d2 = dl**2
    j = np.eye(m) - np.ones((m, m)) / m
    b = -0.5 * j @ d2 @ j
    vals, vecs = np.linalg.eigh(b)
    order = np.argsort(vals)[::-1][:2]
    lams = np.maximum(vals[order], 1e-12)
    lvecs = vecs[:, order]
    mean_d2 = d2.mean(axis=0)
    # Nystrom out-of-sample extension over all points
    da2 = d[:, landmarks] ** 2
    coords = -0.5 * (da2 - mean_d2[None, :]) @ (lvecs / np.sqrt(lams)[None, :])
    return coords


def lens_project(emb: EmbeddingMatrix, metric: str) -> np.ndarray:
    """Deterministic 2D metric MDS lens with a fixed sign convention."""
    n = emb.rows.shape[0]
    if n < 2:
        raise ValueError("lens projection needs at least 2 items")
    d = pairwise_distance(emb, metric)
    if n > LANDMARK_THRESHOLD:
        coords = _landmark_mds_2d(d, N_LANDMARKS)
    else:
        coords = _classical_mds_2d(d)
    # sign convention: first nonzero coordinate of each axis >= 0
    for axis in range(2):
        col = coords[:, axis]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0:
            coords[:, axis] = -col
    return coords


def _median_nn_distance(d: np.ndarray) -> float:
    n = d.shape[0]
    if n < 2:
        return 1.0
    masked = d + np.diag(np.full(n, np.inf))
    return float(np.median(masked.min(axis=1)))


def _threshold_components(sub_d: np.ndarray, threshold: float) -> np.ndarray:
    """Connected components of the <=threshold graph (single-linkage cut)."""
    adj = csr_matrix(sub_d <= threshold)
    _, labels = connected_components(adj, directed=False)
    return labels


def build_map(emb: EmbeddingMatrix, config: TdaMapConfig) -> TdaMap:
    config.validate()
    n = emb.rows.shape[0]
    ids = list(emb.ids)
    if n == 1:
        node = MapNode(node_id=0, members=[0], centroid=emb.rows[0].copy())
        return TdaMap(nodes=[node], edges=[], lens=np.zeros((1, 2)), config=config, ids=ids)

    d = pairwise_distance(emb, config.metric)
    lens = lens_project(emb, config.metric)
    eps0 = _median_nn_distance(d)
    threshold = config.beta * max(eps0, 1e-12)

    mins = lens.min(axis=0)
    maxs = lens.max(axis=0)
    spans = np.maximum(maxs - mins, 1e-12)
    bin_w = spans / config.lens_bins

    nodes: list[MapNode] = []
    membership: dict[int, set[int]] = {}  # item -> node ids
    for by in range(config.lens_bins):
        for bx in range(config.lens_bins):
            lo = mins + np.array([bx, by]) * bin_w - config.overlap * bin_w
            hi = mins + np.array([bx + 1, by + 1]) * bin_w + config.overlap * bin_w
            inside = np.all((lens >= lo) & (lens <= hi), axis=1)
            members = np.nonzero(inside)[0]
            if members.size == 0:
                continue
            labels = _threshold_components(d[np.ix_(members, members)], threshold)
            for lab in np.unique(labels):
                items = members[labels == lab]
                nid = len(nodes)
                nodes.append(
                    MapNode(node_id=nid, members=items.tolist(), centroid=emb.rows[items].mean(axis=0))
                )
                for it in items:
                    membership.setdefault(int(it), set()).add(nid)

    # cover guarantee: every item must land somewhere
    for i in range(n):
        if i not in membership:
            nid = len(nodes)
            nodes.append(MapNode(node_id=nid, members=[i], centroid=emb.rows[i].copy()))
            membership[i] = {nid}

    shared: dict[tuple[int, int], int] = {}
    for node_set in membership.values():
        node_list = sorted(node_set)
        for a in range(len(node_list)):
            for b in range(a + 1, len(node_list)):
                key = (node_list[a], node_list[b])
                shared[key] = shared.get(key, 0) + 1
    edges = [(a, b, c) for (a, b), c in sorted(shared.items())]
    return TdaMap(nodes=nodes, edges=edges, lens=lens, config=config, ids=ids)


def cluster_map(tda_map: TdaMap, config: TdaMapConfig | None = None) -> np.ndarray:
    """Assign every item to a connected component of the retained node graph."""
    config = config or tda_map.config
    n = len(tda_map.ids)
    keep = {nd.node_id for nd in tda_map.nodes if len(nd.members) >= config.min_node_size}
    g = nx.Graph()
    g.add_nodes_from(keep)
    for a, b, _ in tda_map.edges:
        if a in keep and b in keep:
            g.add_edge(a, b)

    assignments = np.full(n, NOISE, dtype=int)
    components = sorted(nx.connected_components(g), key=lambda comp: min(comp))
    cluster_items: list[set[int]] = []
    for comp in components:
        items: set[int] = set()
        for nid in comp:
            items.update(tda_map.nodes[nid].members)
        cluster_items.append(items)

    next_id = 0
    for items in cluster_items:
        if len(items) < config.min_cluster_fraction * n:
            continue  # too small: stays NOISE
        for it in items:
            assignments[it] = next_id
        next_id += 1
    tda_map.assignments = assignments
    return assignments


def _centroids(x: np.ndarray, assignments: np.ndarray, metric: str):
    labels = np.unique(assignments[assignments != NOISE])
    cents = []
    for lab in labels:
        c = x[assignments == lab].mean(axis=0)
        if metric == "cosine":
            norm = np.linalg.norm(c)
            if norm > 0:
                c = c / norm
        cents.append(c)
    return labels, np.array(cents)


def _dist(a: np.ndarray, b: np.ndarray, metric: str) -> float:
    if metric == "euclidean":
        return float(np.linalg.norm(a - b))
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("zero-norm vector under cosine metric")
    return float(1.0 - (a @ b) / (na * nb))


def score_map(emb: EmbeddingMatrix, assignments: np.ndarray, metric: str) -> float:
    """Davies-Bouldin over non-noise clusters plus the noise fraction."""
    x = emb.rows
    noise_fraction = float((assignments == NOISE).mean()) if assignments.size else 1.0
    labels, cents = _centroids(x, assignments, metric)
    k = len(labels)
    if k < 2:
        return np.inf
    scatter = np.array(
        [
            np.mean([_dist(p, cents[i], metric) for p in x[assignments == lab]])
            for i, lab in enumerate(labels)
        ]
    )
    db_terms = []
    for i in range(k):
        worst = 0.0
        for j in range(k):
            if i == j:
                continue
            sep = _dist(cents[i], cents[j], metric)
            if sep == 0:
                return np.inf
            worst = max(worst, (scatter[i] + scatter[j]) / sep)
        db_terms.append(worst)
    return float(np.mean(db_terms)) + noise_fraction


def grid_search(
    emb: EmbeddingMatrix,
    beta_list: list[float],
    metric_list: list[str],
    base_config: TdaMapConfig | None = None,
) -> tuple[TdaMap, list[dict]]:
    """Score every (beta, metric) combination; return the argmin map."""
    if not beta_list or not metric_list:
        raise ValueError("beta_list and metric_list must be non-empty")
    base = base_config or TdaMapConfig()
    best: TdaMap | None = None
    best_score = np.inf
    table = []
    for beta in beta_list:  # beta-major tie-breaking by construction
        for metric in metric_list:
            config = TdaMapConfig(
                beta=beta,
                metric=metric,
                lens_bins=base.lens_bins,
                overlap=base.overlap,
                min_node_size=base.min_node_size,
                min_cluster_fraction=base.min_cluster_fraction,
            )
            m = build_map(emb, config)
            assignments = cluster_map(m, config)
            score = score_map(emb, assignments, metric)
            n_clusters = len(np.unique(assignments[assignments != NOISE]))
            table.append(
                {
                    "beta": beta,
                    "metric": metric,
                    "score": score,
                    "n_clusters": n_clusters,
                    "noise_fraction": float((assignments == NOISE).mean()),
                }
            )
            if score < best_score:
                best_score = score
                best = m
    if best is None or not np.isfinite(best_score):
        raise ValueError("no valid clustering: every grid combination scored infinite")
    return best, table


def export_graphml(tda_map: TdaMap, path: str | Path, labels: list[str | None] | None = None) -> None:
    """GraphML dump with node size/members/dominant-label/lens attributes."""
    g = nx.Graph()
    assignments = tda_map.assignments
    for nd in tda_map.nodes:
        attrs = {
            "size": len(nd.members),
            "lens_x": float(np.mean(tda_map.lens[nd.members, 0])),
            "lens_y": float(np.mean(tda_map.lens[nd.members, 1])),
        }
        if len(nd.members) <= 100:
            attrs["member_ids"] = ";".join(tda_map.ids[i] for i in nd.members)
        if labels is not None:
            member_labels = [labels[i] for i in nd.members if labels[i] is not None]
            if member_labels:
                values, counts = np.unique(member_labels, return_counts=True)
                top = counts.argmax()
                attrs["dominant_label"] = str(values[top])
                attrs["dominant_share"] = float(counts[top] / len(member_labels))
        if assignments is not None:
            clusters = {int(assignments[i]) for i in nd.members}
            attrs["cluster"] = ",".join(str(c) for c in sorted(clusters))
        g.add_node(nd.node_id, **attrs)
    for a, b, c in tda_map.edges:
        g.add_edge(a, b, shared_count=c)
    nx.write_graphml(g, path)
