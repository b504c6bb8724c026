"""Command-line interface.

Exit codes: 0 success, 2 validation/config error, 3 stage failure.
Diagnostics go to stderr; `--progress` emits machine-readable JSON lines
on stdout.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import evalrep, tdamap
from .ingest import load_corpus, load_corpus_cache, save_corpus_cache
from .manifest import read_manifest
from .persist import tda_signature
from .pipeline import ConfigError, Pipeline, PipelineConfig, StageError, pretrain_foundational
from .sslnet import (
    AugmentationSpec,
    TrainConfig,
    distill as distill_student,
    embed_corpus,
    export_embeddings,
    import_embeddings,
    load_checkpoint,
    save_checkpoint,
    train_ssl,
)
from .synthgen import SWED_PALETTE, SpvdConfig, SwedConfig, gen_spvd_dataset, gen_swed_dataset
from .vectorize import load_features

EXIT_VALIDATION = 2
EXIT_STAGE = 3


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map exceptions to the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, ValueError) as exc:
            _fail(EXIT_VALIDATION, str(exc))
        except StageError as exc:
            _fail(EXIT_STAGE, str(exc))
        except (OSError, RuntimeError) as exc:
            _fail(EXIT_STAGE, str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except Exception as exc:
        raise ValueError(f"bad size {text!r}, expected WxH") from exc


@click.group()
def main() -> None:
    """Wafer-map topological clustering pipeline."""


@main.command()
@click.option("--kind", type=click.Choice(["spvd", "swed"]), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--count", type=int, default=200, show_default=True, help="SPVD image count")
@click.option("--per-class", type=int, default=200, show_default=True, help="SWED images per class")
@_guard
def gen(kind: str, seed: int, out_dir: Path, count: int, per_class: int) -> None:
    """Generate a synthetic dataset with a manifest."""
    if kind == "spvd":
        manifest = gen_spvd_dataset(SpvdConfig(image_count=count, seed=seed), out_dir)
    else:
        manifest = gen_swed_dataset(SwedConfig(per_class_count=per_class, seed=seed), out_dir)
    click.echo(f"wrote {len(manifest.entries)} items under {out_dir}", err=True)


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--size", default="64x64", show_default=True, help="target WxH")
@click.option("--mode", type=click.Choice(["bilinear", "nearest"]), default="bilinear", show_default=True)
@click.option("--decode-grids", is_flag=True, help="decode palette-coded wafer grids")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@_guard
def ingest(manifest_path: Path, size: str, mode: str, decode_grids: bool, out_path: Path) -> None:
    """Load a manifest into a binary corpus cache."""
    corpus, errors = load_corpus(
        read_manifest(manifest_path),
        _parse_size(size),
        mode=mode,
        decode_grids=decode_grids,
        palette=SWED_PALETTE if decode_grids else None,
    )
    for e in errors:
        click.echo(f"skipped {e.id}: {e.message}", err=True)
    save_corpus_cache(corpus, out_path)
    click.echo(f"cached {len(corpus)} items to {out_path}", err=True)


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--mode", type=click.Choice(["sublevel", "distance"]), default="sublevel", show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--features", "features_path", type=click.Path(path_type=Path), default=None,
              help="also write a standardized feature matrix (npz)")
@click.option("--scheme", type=click.Choice(["landscape", "pimage"]), default="landscape", show_default=True)
@_guard
def persist(corpus_path: Path, mode: str, out_dir: Path, features_path: Path | None, scheme: str) -> None:
    """Compute persistence diagrams (CSV dim,birth,death per item)."""
    corpus = load_corpus_cache(corpus_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    for it in corpus.items:
        source = it.grid if mode == "distance" else it.image
        d0, d1 = tda_signature(source, mode)
        lines = ["dim,birth,death"]
        for dim, diag in ((0, d0), (1, d1)):
            for birth, death in diag.intervals:
                death_s = "inf" if np.isinf(death) else f"{death:.9g}"
                lines.append(f"{dim},{birth:.9g},{death_s}")
        (out_dir / f"{it.id}.csv").write_text("\n".join(lines) + "\n")
    if features_path is not None:
        from .vectorize import featurize_corpus, save_features

        save_features(featurize_corpus(corpus, mode=mode, scheme=scheme), features_path)
    click.echo(f"wrote {len(corpus)} diagrams to {out_dir}", err=True)


def _train_bits(config_path: Path | None):
    cfg = json.loads(Path(config_path).read_text()) if config_path else {}
    train_config = TrainConfig(
        epochs=cfg.get("epochs", 100),
        batch_size=cfg.get("batch_size", 256),
        learning_rate=cfg.get("learning_rate", 0.12),
        temperature=cfg.get("temperature", 0.5),
        optimizer=cfg.get("optimizer", "sgd"),
        seed=cfg.get("seed", 0),
    )
    aug = cfg.get("augment", {})
    spec = AugmentationSpec(
        h_flip=aug.get("h_flip", True),
        v_flip=aug.get("v_flip", True),
        rotation_deg=tuple(aug.get("rotation_deg", [0.0, 45.0])),
        crop_min_area_fraction=aug.get("crop_min_area_fraction"),
        fill_value=aug.get("fill_value", 0.0),
    )
    return train_config, spec, tuple(cfg.get("widths", [8, 16, 32]))


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--tda", "tda_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@_guard
def train(corpus_path: Path, tda_path: Path, config_path: Path | None, out_path: Path) -> None:
    """Contrastive training of the fused encoder."""
    corpus = load_corpus_cache(corpus_path)
    feats = load_features(tda_path)
    train_config, spec, widths = _train_bits(config_path)
    ckpt = train_ssl(corpus, feats, spec, train_config, widths=widths)
    save_checkpoint(ckpt, out_path)
    click.echo(f"checkpoint saved to {out_path}", err=True)


@main.command()
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--tda", "tda_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@_guard
def embed(ckpt_path: Path, corpus_path: Path, tda_path: Path, out_path: Path) -> None:
    """Embed a corpus with a trained checkpoint (zero-shot friendly)."""
    emb = embed_corpus(load_checkpoint(ckpt_path), load_corpus_cache(corpus_path), load_features(tda_path))
    export_embeddings(emb, out_path)
    click.echo(f"embeddings saved to {out_path}", err=True)


@main.command()
@click.option("--teacher", "teacher_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--tda", "tda_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@_guard
def distill(teacher_path: Path, corpus_path: Path, tda_path: Path, config_path: Path | None,
            out_path: Path) -> None:
    """Distill teacher embeddings into a smaller student encoder."""
    teacher = import_embeddings(teacher_path)
    corpus = load_corpus_cache(corpus_path)
    feats = load_features(tda_path)
    train_config, _, _ = _train_bits(config_path)
    ckpt = distill_student(teacher, corpus, feats, train_config)
    save_checkpoint(ckpt, out_path)
    click.echo(f"student checkpoint saved to {out_path}", err=True)


@main.command(name="map")
@click.option("--emb", "emb_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--beta", default="3.5,10,20", show_default=True, help="comma-separated beta grid")
@click.option("--metric", default="euclidean,cosine", show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True, help="GraphML output")
@click.option("--assignments", "assignments_path", type=click.Path(path_type=Path), required=True)
@_guard
def map_cmd(emb_path: Path, beta: str, metric: str, out_path: Path, assignments_path: Path) -> None:
    """Grid-search TDA maps and export the best one."""
    emb = import_embeddings(emb_path)
    betas = [float(b) for b in beta.split(",") if b]
    metrics = [m.strip() for m in metric.split(",") if m.strip()]
    best, table = tdamap.grid_search(emb, betas, metrics)
    tdamap.export_graphml(best, out_path)
    lines = ["id,cluster"] + [
        f"{i},{('NOISE' if a == tdamap.NOISE else int(a))}"
        for i, a in zip(emb.ids, best.assignments)
    ]
    Path(assignments_path).write_text("\n".join(lines) + "\n")
    for row in table:
        click.echo(json.dumps(row), err=True)
    click.echo(f"best: beta={best.config.beta} metric={best.config.metric}", err=True)


@main.command(name="eval")
@click.option("--assignments", "assignments_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--threshold", type=float, default=0.10, show_default=True, help="cluster naming share")
@_guard
def eval_cmd(assignments_path: Path, manifest_path: Path, out_path: Path, threshold: float) -> None:
    """Score assignments against manifest labels and write a JSON report."""
    manifest = read_manifest(manifest_path)
    labels_by_id = {e.id: (e.label or "unlabeled") for e in manifest.entries}
    ids, assignments = [], []
    for line in Path(assignments_path).read_text().splitlines()[1:]:
        if not line.strip():
            continue
        ident, cluster = line.rsplit(",", 1)
        ids.append(ident)
        assignments.append(evalrep.NOISE if cluster == "NOISE" else int(cluster))
    missing = [i for i in ids if i not in labels_by_id]
    if missing:
        raise ValueError(f"assignment ids missing from manifest: {missing[:5]}")
    labels = [labels_by_id[i] for i in ids]
    report = evalrep.build_report(np.array(assignments), labels, naming_threshold=threshold)
    evalrep.export_report(report, out_path)
    click.echo(json.dumps(report.metrics), err=True)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--workdir", type=click.Path(path_type=Path), required=True)
@click.option("--progress", is_flag=True, help="emit JSON-lines progress on stdout")
@_guard
def run(config_path: Path, workdir: Path, progress: bool) -> None:
    """Run the full pipeline from a JSON config."""
    config = PipelineConfig.from_file(config_path)
    workdir.mkdir(parents=True, exist_ok=True)
    cb = (lambda ev: click.echo(json.dumps(ev))) if progress else None
    report = Pipeline(config, workdir, progress=cb).run()
    click.echo(json.dumps(report.metrics), err=True)
    click.echo(f"report written to {workdir / 'report.json'}", err=True)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--workdir", type=click.Path(path_type=Path), default=None,
              help="where to generate the combined corpus (default: alongside --out)")
@click.option("--progress", is_flag=True)
@_guard
def pretrain(config_path: Path, out_path: Path, workdir: Path | None, progress: bool) -> None:
    """Train a foundational checkpoint on a combined synthetic corpus."""
    config = PipelineConfig.from_file(config_path)
    workdir = workdir or out_path.parent / "pretrain_work"
    cb = (lambda ev: click.echo(json.dumps(ev))) if progress else None
    pretrain_foundational(config, workdir, out_path, progress=cb)
    click.echo(f"foundational checkpoint saved to {out_path}", err=True)


if __name__ == "__main__":
    main()
