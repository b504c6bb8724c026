"""Compact convolutional encoder with TDA-feature fusion.

Three conv stages (default widths 8/16/32: conv3x3 + ReLU + 2x2 max pool,
final stage global-average-pooled), the pooled visual feature concatenated
with the per-item TDA vector, then a two-layer projection head whose
L2-normalized output is the embedding used for contrastive training and
downstream clustering.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers as L


@dataclass
class EncoderParams:
    widths: tuple[int, int, int] = (8, 16, 32)
    head_hidden: int = 64
    embed_dim: int = 32
    tda_dim: int = 0
    weights: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def fusion_dim(self) -> int:
        return self.widths[2] + self.tda_dim

    def validate_finite(self) -> None:
        for name, w in self.weights.items():
            if not np.isfinite(w).all():
                raise ValueError(f"non-finite values in parameter {name!r}")


def init_params(
    seed: int,
    tda_dim: int,
    widths: tuple[int, int, int] = (8, 16, 32),
    head_hidden: int = 64,
    embed_dim: int = 32,
) -> EncoderParams:
    """He-normal initialization, biases zero, deterministic in the seed."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    w1, w2, w3 = widths
    fusion = w3 + tda_dim

    def he(shape, fan_in):
        return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)

    weights = {
        "conv1_w": he((w1, 1, 3, 3), 9),
        "conv1_b": np.zeros(w1),
        "conv2_w": he((w2, w1, 3, 3), 9 * w1),
        "conv2_b": np.zeros(w2),
        "conv3_w": he((w3, w2, 3, 3), 9 * w2),
        "conv3_b": np.zeros(w3),
        "head1_w": he((head_hidden, fusion), fusion),
        "head1_b": np.zeros(head_hidden),
        "head2_w": he((embed_dim, head_hidden), head_hidden),
        "head2_b": np.zeros(embed_dim),
    }
    return EncoderParams(
        widths=widths, head_hidden=head_hidden, embed_dim=embed_dim, tda_dim=tda_dim, weights=weights
    )


def forward(
    images: np.ndarray, tda: np.ndarray, params: EncoderParams, want_cache: bool = False
):
    """Batch forward pass.

    images: (B, H, W); tda: (B, tda_dim).  Returns the L2-normalized
    embedding (B, embed_dim); with ``want_cache`` also the backbone feature
    and the cache needed for the backward pass.
    """
    if images.ndim != 3:
        raise ValueError("images must be (B, H, W)")
    if tda.shape != (images.shape[0], params.tda_dim):
        raise ValueError(
            f"tda shape {tda.shape} does not match (batch, {params.tda_dim})"
        )
    w = params.weights
    x = images[:, None, :, :]
    c1, cc1 = L.conv3x3_forward(x, w["conv1_w"], w["conv1_b"])
    r1, cr1 = L.relu_forward(c1)
    p1, cp1 = L.maxpool2_forward(r1)
    c2, cc2 = L.conv3x3_forward(p1, w["conv2_w"], w["conv2_b"])
    r2, cr2 = L.relu_forward(c2)
    p2, cp2 = L.maxpool2_forward(r2)
    c3, cc3 = L.conv3x3_forward(p2, w["conv3_w"], w["conv3_b"])
    r3, cr3 = L.relu_forward(c3)
    visual, cg = L.gap_forward(r3)
    fused = np.concatenate([visual, tda], axis=1)
    h1, ch1 = L.affine_forward(fused, w["head1_w"], w["head1_b"])
    hr, chr_ = L.relu_forward(h1)
    h2, ch2 = L.affine_forward(hr, w["head2_w"], w["head2_b"])
    z, cn = L.l2norm_forward(h2)
    if not want_cache:
        return z
    cache = (cc1, cr1, cp1, cc2, cr2, cp2, cc3, cr3, cg, ch1, chr_, ch2, cn, visual.shape[1])
    return z, fused, cache


def backward(grad_z: np.ndarray, cache, params: EncoderParams) -> dict[str, np.ndarray]:
    """Gradients of all weights given d(loss)/d(embedding)."""
    cc1, cr1, cp1, cc2, cr2, cp2, cc3, cr3, cg, ch1, chr_, ch2, cn, vis_dim = cache
    dh2 = L.l2norm_backward(grad_z, cn)
    dhr, dW_h2, db_h2 = L.affine_backward(dh2, ch2)
    dh1 = L.relu_backward(dhr, chr_)
    dfused, dW_h1, db_h1 = L.affine_backward(dh1, ch1)
    dvisual = dfused[:, :vis_dim]
    dr3 = L.gap_backward(dvisual, cg)
    dc3 = L.relu_backward(dr3, cr3)
    dp2, dW_c3, db_c3 = L.conv3x3_backward(dc3, cc3)
    dr2 = L.maxpool2_backward(dp2, cp2)
    dc2 = L.relu_backward(dr2, cr2)
    dp1, dW_c2, db_c2 = L.conv3x3_backward(dc2, cc2)
    dr1 = L.maxpool2_backward(dp1, cp1)
    dc1 = L.relu_backward(dr1, cr1)
    _, dW_c1, db_c1 = L.conv3x3_backward(dc1, cc1)
    return {
        "conv1_w": dW_c1,
        "conv1_b": db_c1,
        "conv2_w": dW_c2,
        "conv2_b": db_c2,
        "conv3_w": dW_c3,
        "conv3_b": db_c3,
        "head1_w": dW_h1,
        "head1_b": db_h1,
        "head2_w": dW_h2,
        "head2_b": db_h2,
    }


def backbone_features(images: np.ndarray, tda: np.ndarray, params: EncoderParams) -> np.ndarray:
    """Pre-head fused feature (visual GAP + TDA), for the escape-hatch flag."""
    _, fused, _ = forward(images, tda, params, want_cache=True)
    return fused
