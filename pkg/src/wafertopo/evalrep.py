"""Clustering evaluation against held-out labels: cross-tabs, metrics,
cluster naming, report export."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NOISE = -1
NOISE_NAME = "NOISE"


@dataclass
class CrossTab:
    counts: np.ndarray  # (n_clusters, n_labels) including the NOISE row
    cluster_names: list[str]
    label_names: list[str]

    def validate(self) -> None:
        if (self.counts < 0).any():
            raise ValueError("negative counts")
        if self.counts.shape != (len(self.cluster_names), len(self.label_names)):
            raise ValueError("shape/name mismatch")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class ClusterReport:
    clusters: list[dict]  # {id, name, size, labels: {label: count}}
    metrics: dict
    config: dict = field(default_factory=dict)


def _check_alignment(assignments, labels):
    if len(assignments) != len(labels):
        raise ValueError("assignments and labels are misaligned")
    if len(assignments) == 0:
        raise ValueError("empty input")


def crosstab(assignments: np.ndarray, labels: list[str]) -> CrossTab:
    """Exact contingency counts; NOISE items get their own row."""
    _check_alignment(assignments, labels)
    label_names = sorted(set(labels))
    cluster_ids = sorted(int(c) for c in np.unique(assignments) if c != NOISE)
    cluster_names = [str(c) for c in cluster_ids] + [NOISE_NAME]
    lut = {lab: i for i, lab in enumerate(label_names)}
    cidx = {c: i for i, c in enumerate(cluster_ids)}
    counts = np.zeros((len(cluster_names), len(label_names)), dtype=int)
    for a, lab in zip(assignments, labels):
        row = cidx[int(a)] if a != NOISE else len(cluster_ids)
        counts[row, lut[lab]] += 1
    tab = CrossTab(counts=counts, cluster_names=cluster_names, label_names=label_names)
    tab.validate()
    return tab


def name_clusters(tab: CrossTab, threshold: float = 0.10) -> list[str]:
    """Name each cluster by its >= threshold-share labels, descending."""
    names = []
    for row in tab.counts:
        size = row.sum()
        if size == 0:
            names.append("")
            continue
        shares = row / size
        order = np.argsort(-shares, kind="stable")
        picked = [tab.label_names[i] for i in order if shares[i] >= threshold]
        if not picked:
            picked = [tab.label_names[order[0]]]
        names.append(" | ".join(picked))
    return names


def purity(tab: CrossTab) -> float:
    """Sum of per-cluster max label counts over N (noise row excluded)."""
    rows = [
        row for name, row in zip(tab.cluster_names, tab.counts) if name != NOISE_NAME and row.sum()
    ]
    total = sum(int(r.sum()) for r in rows)
    if total == 0:
        raise ValueError("no non-noise items")
    return float(sum(int(r.max()) for r in rows) / total)


def ari(assignments: np.ndarray, labels: list[str]) -> float:
    """Adjusted Rand index over non-noise items, from the contingency table."""
    _check_alignment(assignments, labels)
    mask = np.asarray(assignments) != NOISE
    a = np.asarray(assignments)[mask]
    l = [lab for lab, keep in zip(labels, mask) if keep]
    if len(a) == 0:
        raise ValueError("no non-noise items")
    tab = crosstab(a, l)
    nij = tab.counts[:-1] if tab.cluster_names[-1] == NOISE_NAME else tab.counts
    n = nij.sum()

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(nij).sum()
    sum_a = comb2(nij.sum(axis=1)).sum()
    sum_b = comb2(nij.sum(axis=0)).sum()
    expected = sum_a * sum_b / comb2(n) if n > 1 else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def largest_fraction(assignments: np.ndarray) -> float:
    a = np.asarray(assignments)
    if a.size == 0:
        raise ValueError("empty input")
    non_noise = a[a != NOISE]
    if non_noise.size == 0:
        return 0.0
    _, counts = np.unique(non_noise, return_counts=True)
    return float(counts.max() / a.size)


def noise_fraction(assignments: np.ndarray) -> float:
    a = np.asarray(assignments)
    if a.size == 0:
        raise ValueError("empty input")
    return float((a == NOISE).mean())


def build_report(
    assignments: np.ndarray,
    labels: list[str],
    db_score: float | None = None,
    config: dict | None = None,
    naming_threshold: float = 0.10,
) -> ClusterReport:
    tab = crosstab(assignments, labels)
    names = name_clusters(tab, naming_threshold)
    clusters = []
    for cname, rname, row in zip(tab.cluster_names, names, tab.counts):
        clusters.append(
            {
                "id": cname,
                "name": rname if cname != NOISE_NAME else NOISE_NAME,
                "size": int(row.sum()),
                "labels": {
                    lab: int(c) for lab, c in zip(tab.label_names, row) if c > 0
                },
            }
        )
    n_clusters = sum(1 for c in tab.cluster_names if c != NOISE_NAME)
    metrics = {
        "purity": purity(tab),
        "ari": ari(assignments, labels),
        "db_score": None if db_score is None or not np.isfinite(db_score) else float(db_score),
        "noise_fraction": noise_fraction(assignments),
        "largest_cluster_fraction": largest_fraction(assignments),
        "n_clusters": n_clusters,
    }
    return ClusterReport(clusters=clusters, metrics=metrics, config=config or {})


REPORT_SCHEMA = {
    "type": "object",
    "required": ["clusters", "metrics", "config"],
    "properties": {
        "clusters": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "name", "size", "labels"],
                "properties": {
                    "id": {"type": "string"},
                    "name": {"type": "string"},
                    "size": {"type": "integer", "minimum": 0},
                    "labels": {
                        "type": "object",
                        "additionalProperties": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
        "metrics": {
            "type": "object",
            "required": [
                "purity",
                "ari",
                "noise_fraction",
                "largest_cluster_fraction",
                "n_clusters",
            ],
            "properties": {
                "purity": {"type": "number"},
                "ari": {"type": "number"},
                "db_score": {"type": ["number", "null"]},
                "noise_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "largest_cluster_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "n_clusters": {"type": "integer", "minimum": 0},
            },
        },
        "config": {"type": "object"},
    },
}


def report_to_dict(report: ClusterReport) -> dict:
    return {"clusters": report.clusters, "metrics": report.metrics, "config": report.config}


def export_report(report: ClusterReport, path: str | Path, fmt: str = "json") -> None:
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
    elif fmt == "csv":
        lines = ["cluster,name,size,purity,ari,noise_fraction"]
        m = report.metrics
        for c in report.clusters:
            name = c["name"].replace('"', "'")
            lines.append(
                f'{c["id"]},"{name}",{c["size"]},{m["purity"]},{m["ari"]},{m["noise_fraction"]}'
            )
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def export_histogram(tab: CrossTab, out_dir: str | Path) -> None:
    """CSV (cluster,label,count) plus one SVG bar chart per cluster."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["cluster,label,count"]
    for cname, row in zip(tab.cluster_names, tab.counts):
        for lab, c in zip(tab.label_names, row):
            if c > 0:
                lines.append(f"{cname},{lab},{c}")
    (out_dir / "histogram.csv").write_text("\n".join(lines) + "\n")

    for cname, row in zip(tab.cluster_names, tab.counts):
        total = row.sum()
        if total == 0:
            continue
        bar_h, gap, width = 18, 6, 400
        items = [(lab, c) for lab, c in zip(tab.label_names, row) if c > 0]
        height = len(items) * (bar_h + gap) + gap
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width + 160}" height="{height}">'
        ]
        for i, (lab, c) in enumerate(items):
            y = gap + i * (bar_h + gap)
            w = width * c / row.max()
            parts.append(f'<rect x="150" y="{y}" width="{w:.1f}" height="{bar_h}" fill="#21918c"/>')
            parts.append(
                f'<text x="145" y="{y + bar_h - 4}" text-anchor="end" font-size="12">{lab} ({c})</text>'
            )
        parts.append("</svg>")
        safe = cname.replace("/", "_")
        (out_dir / f"cluster_{safe}.svg").write_text("\n".join(parts) + "\n")
