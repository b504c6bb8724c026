"""Contrastive training loop, zero-shot embedding, and distillation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import make_rng
from ..types import Corpus
from ..vectorize import FeatureSet
from . import encoder as enc
from .augment import AugmentationSpec, augment
from .io import EmbeddingMatrix, ModelCheckpoint
from .loss import ntxent_loss
from .optim import cosine_lr, make_optimizer

STREAM_INIT = 100
STREAM_BATCH = 101
STREAM_AUG = 102


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 0.12
    temperature: float = 0.5
    optimizer: str = "sgd"  # sgd (momentum 0.9) | adam
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 0 or self.batch_size < 2:
            raise ValueError("need epochs >= 0 and batch_size >= 2")
        if self.learning_rate <= 0 or self.temperature <= 0:
            raise ValueError("learning_rate and temperature must be positive")


def _corpus_arrays(corpus: Corpus, tda: FeatureSet) -> tuple[np.ndarray, np.ndarray]:
    if tda.ids != corpus.ids:
        raise ValueError("TDA feature ids do not match corpus ids")
    images = np.stack([it.image for it in corpus.items])
    return images, tda.values


def train_ssl(
    corpus: Corpus,
    tda: FeatureSet,
    spec: AugmentationSpec,
    config: TrainConfig,
    widths: tuple[int, int, int] = (8, 16, 32),
    init_weights: dict | None = None,
) -> ModelCheckpoint:
    """Train the fused encoder with NT-Xent over augmented view pairs."""
    config.validate()
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    if config.batch_size > 2 * len(corpus):
        raise ValueError("batch_size exceeds twice the corpus size")
    images, feats = _corpus_arrays(corpus, tda)
    n = images.shape[0]

    params = enc.init_params(config.seed, tda_dim=feats.shape[1], widths=widths)
    if init_weights is not None:
        params.weights = {k: v.copy() for k, v in init_weights.items()}
    opt = make_optimizer(config.optimizer, config.learning_rate)
    batch_rng = make_rng(config.seed, STREAM_BATCH)
    aug_rng = make_rng(config.seed, STREAM_AUG)

    batches_per_epoch = max(1, n // config.batch_size)
    total_steps = config.epochs * batches_per_epoch
    loss_curve = []
    step = 0
    for epoch in range(config.epochs):
        order = batch_rng.permutation(n)
        epoch_losses = []
        for b in range(batches_per_epoch):
            idx = order[b * config.batch_size : (b + 1) * config.batch_size]
            views = np.empty((2 * len(idx),) + images.shape[1:])
            for j, i in enumerate(idx):
                views[2 * j] = augment(images[i], spec, aug_rng)
                views[2 * j + 1] = augment(images[i], spec, aug_rng)
            tda_batch = np.repeat(feats[idx], 2, axis=0)
            z, _, cache = enc.forward(views, tda_batch, params, want_cache=True)
            loss, grad_z = ntxent_loss(z, config.temperature)
            if not np.isfinite(loss):
                raise RuntimeError(f"NaN loss at epoch {epoch}, batch {b}")
            grads = enc.backward(grad_z, cache, params)
            opt.step(params.weights, grads, lr=cosine_lr(config.learning_rate, step, total_steps))
            epoch_losses.append(loss)
            step += 1
        loss_curve.append(float(np.mean(epoch_losses)))

    meta = {
        "seed": config.seed,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "temperature": config.temperature,
        "optimizer": config.optimizer,
        "loss_curve": loss_curve,
        "image_size": [images.shape[2], images.shape[1]],
        "tda_echo": tda.params_echo,
        "augmentation": {
            "h_flip": spec.h_flip,
            "v_flip": spec.v_flip,
            "rotation_deg": list(spec.rotation_deg),
            "crop_min_area_fraction": spec.crop_min_area_fraction,
            "fill_value": spec.fill_value,
        },
    }
    return ModelCheckpoint(params=params, meta=meta)


def embed_corpus(
    ckpt: ModelCheckpoint,
    corpus: Corpus,
    tda: FeatureSet,
    use_backbone: bool = False,
    batch_size: int = 256,
) -> EmbeddingMatrix:
    """Deterministic augmentation-free embedding; supports zero-shot corpora."""
    images, feats = _corpus_arrays(corpus, tda)
    if feats.shape[1] != ckpt.params.tda_dim:
        raise ValueError(
            f"TDA dim {feats.shape[1]} does not match checkpoint ({ckpt.params.tda_dim})"
        )
    echo = ckpt.meta.get("tda_echo")
    if echo is not None:
        for key in ("scheme", "mode"):
            if key in echo and echo[key] != tda.params_echo.get(key):
                raise ValueError(
                    f"TDA {key} mismatch: checkpoint {echo[key]!r} vs features "
                    f"{tda.params_echo.get(key)!r}"
                )
    rows = []
    for i in range(0, images.shape[0], batch_size):
        batch = images[i : i + batch_size]
        fb = feats[i : i + batch_size]
        if use_backbone:
            fused = enc.backbone_features(batch, fb, ckpt.params)
            norms = np.linalg.norm(fused, axis=1, keepdims=True)
            rows.append(np.divide(fused, norms, out=np.zeros_like(fused), where=norms > 0))
        else:
            rows.append(enc.forward(batch, fb, ckpt.params))
    rows = np.vstack(rows) if rows else np.empty((0, ckpt.params.embed_dim))
    return EmbeddingMatrix(ids=corpus.ids, rows=rows)


def distill(
    teacher: EmbeddingMatrix,
    corpus: Corpus,
    tda: FeatureSet,
    config: TrainConfig,
    widths: tuple[int, int, int] = (4, 8, 16),
    init_weights: dict | None = None,
) -> ModelCheckpoint:
    """Train a smaller student to reproduce the teacher's unit embeddings.

    Loss: mean(1 - cos(student(x), teacher(x))), no augmentation.
    """
    config.validate()
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    if teacher.ids != corpus.ids:
        raise ValueError("teacher embedding ids do not match corpus ids")
    images, feats = _corpus_arrays(corpus, tda)
    n = images.shape[0]
    t_norm = teacher.rows / np.linalg.norm(teacher.rows, axis=1, keepdims=True)

    params = enc.init_params(config.seed, tda_dim=feats.shape[1], widths=widths,
                             embed_dim=teacher.rows.shape[1])
    if init_weights is not None:
        params.weights = {k: v.copy() for k, v in init_weights.items()}
    opt = make_optimizer(config.optimizer, config.learning_rate)
    batch_rng = make_rng(config.seed, STREAM_BATCH)

    batches_per_epoch = max(1, n // min(config.batch_size, n))
    total_steps = config.epochs * batches_per_epoch
    loss_curve = []
    step = 0
    for epoch in range(config.epochs):
        order = batch_rng.permutation(n)
        epoch_losses = []
        for b in range(batches_per_epoch):
            idx = order[b * config.batch_size : (b + 1) * config.batch_size]
            if idx.size == 0:
                continue
            z, _, cache = enc.forward(images[idx], feats[idx], params, want_cache=True)
            target = t_norm[idx]
            loss = float(np.mean(1.0 - (z * target).sum(axis=1)))
            if not np.isfinite(loss):
                raise RuntimeError(f"NaN loss at epoch {epoch}, batch {b}")
            grad_z = -target / idx.size
            grads = enc.backward(grad_z, cache, params)
            opt.step(params.weights, grads, lr=cosine_lr(config.learning_rate, step, total_steps))
            epoch_losses.append(loss)
            step += 1
        loss_curve.append(float(np.mean(epoch_losses)))

    meta = {
        "seed": config.seed,
        "epochs": config.epochs,
        "distilled": True,
        "loss_curve": loss_curve,
        "image_size": [images.shape[2], images.shape[1]],
        "tda_echo": tda.params_echo,
    }
    return ModelCheckpoint(params=params, meta=meta)
