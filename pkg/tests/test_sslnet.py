import numpy as np
import pytest

from oracles import finite_difference, ntxent_reference
from wafertopo.rng import make_rng
from wafertopo.sslnet import (
    AugmentationSpec,
    EmbeddingMatrix,
    ModelCheckpoint,
    TrainConfig,
    augment,
    backward,
    distill,
    embed_corpus,
    export_embeddings,
    forward,
    import_embeddings,
    init_params,
    load_checkpoint,
    ntxent_loss,
    rotate_nearest,
    save_checkpoint,
    train_ssl,
)
from wafertopo.types import Corpus, CorpusItem
from wafertopo.vectorize import FeatureSet


# -- augmentation -----------------------------------------------------------

def test_rotation_quarter_turns_identity():
    rng = np.random.default_rng(0)
    img = rng.random((12, 12))
    out = img
    for _ in range(4):
        out = rotate_nearest(out, 90.0)
    assert np.allclose(out, img)


def test_rotation_zero_identity():
    img = np.random.default_rng(1).random((9, 9))
    assert np.array_equal(rotate_nearest(img, 0.0), img)


def test_augment_preserves_shape_and_determinism():
    spec = AugmentationSpec(h_flip=True, v_flip=True, rotation_deg=(0, 45), crop_min_area_fraction=0.7)
    img = np.random.default_rng(2).random((16, 16))
    a = augment(img, spec, make_rng(5, 0))
    b = augment(img, spec, make_rng(5, 0))
    assert a.shape == img.shape
    assert np.array_equal(a, b)


# -- loss -------------------------------------------------------------------

def test_ntxent_matches_scalar_reference():
    rng = np.random.default_rng(3)
    z = rng.normal(size=(10, 6))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    loss, _ = ntxent_loss(z, 0.5)
    assert loss == pytest.approx(ntxent_reference(z, 0.5), rel=1e-12)


def test_ntxent_gradient_finite_difference():
    rng = np.random.default_rng(4)
    z = rng.normal(size=(6, 4))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    _, grad = ntxent_loss(z, 0.7)
    # finite differences on the pre-normalization representation would change
    # the norms, so evaluate the loss as a raw function of z (tolerating the
    # small norm drift from the +/- eps steps)
    num = finite_difference(lambda v: ntxent_reference(v, 0.7), z.copy(), eps=1e-6)
    rel = np.abs(grad - num).max() / max(np.abs(num).max(), 1e-12)
    assert rel < 1e-4


def test_ntxent_requires_unit_rows_and_even_batch():
    rng = np.random.default_rng(5)
    z = rng.normal(size=(4, 3))
    with pytest.raises(ValueError):
        ntxent_loss(z, 0.5)  # not normalized
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    with pytest.raises(ValueError):
        ntxent_loss(z[:3], 0.5)  # odd batch


def test_ntxent_perfect_alignment_is_low():
    rng = np.random.default_rng(6)
    base = rng.normal(size=(3, 8))
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    z = np.repeat(base, 2, axis=0)
    aligned, _ = ntxent_loss(z, 0.5)
    shuffled = z.copy()
    shuffled[1], shuffled[3] = z[3], z[1]  # break the positive pairs
    broken, _ = ntxent_loss(shuffled, 0.5)
    assert aligned < broken


# -- encoder ----------------------------------------------------------------

def test_encoder_output_unit_norm():
    params = init_params(0, tda_dim=5, widths=(2, 3, 4), embed_dim=6)
    rng = np.random.default_rng(7)
    z = forward(rng.random((3, 12, 12)), rng.random((3, 5)), params)
    assert np.allclose(np.linalg.norm(z, axis=1), 1.0)


def test_encoder_gradients_finite_difference():
    params = init_params(1, tda_dim=3, widths=(2, 2, 3), embed_dim=4, head_hidden=5)
    rng = np.random.default_rng(8)
    images = rng.random((4, 8, 8))
    tda = rng.random((4, 3))
    target = rng.normal(size=(4, 4))

    def loss_for(weights):
        saved = params.weights
        params.weights = weights
        z = forward(images, tda, params)
        params.weights = saved
        return float((z * target).sum())

    z, _, cache = forward(images, tda, params, want_cache=True)
    grads = backward(target, cache, params)
    worst = 0.0
    for name in sorted(params.weights):
        def f(w, name=name):
            trial = {k: (w if k == name else v) for k, v in params.weights.items()}
            return loss_for(trial)

        num = finite_difference(f, params.weights[name].copy(), eps=1e-6)
        denom = max(np.abs(num).max(), 1e-8)
        worst = max(worst, np.abs(grads[name] - num).max() / denom)
    assert worst < 1e-4


# -- io ---------------------------------------------------------------------

def test_embedding_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    rows = rng.normal(size=(5, 7)).astype(np.float64)
    emb = EmbeddingMatrix(ids=[f"item{i}" for i in range(5)], rows=rows)
    path = tmp_path / "e.bin"
    export_embeddings(emb, path)
    back = import_embeddings(path)
    assert back.ids == emb.ids
    assert np.allclose(back.rows, rows, atol=1e-6)


def test_embedding_truncation_detected(tmp_path):
    emb = EmbeddingMatrix(ids=["a", "b"], rows=np.ones((2, 3)))
    path = tmp_path / "e.bin"
    export_embeddings(emb, path)
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(ValueError):
        import_embeddings(path)


def test_checkpoint_round_trip(tmp_path):
    params = init_params(2, tda_dim=4, widths=(2, 3, 4))
    ckpt = ModelCheckpoint(params=params, meta={"epochs": 3, "note": "x"})
    path = tmp_path / "c.bin"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    assert back.meta == ckpt.meta
    assert back.params.widths == params.widths
    assert back.params.tda_dim == 4
    # tensors are stored as float32
    for name, w in params.weights.items():
        assert np.allclose(back.params.weights[name], w, atol=1e-6)
    # a second save/load cycle is lossless
    save_checkpoint(back, path)
    again = load_checkpoint(path)
    for name, w in back.params.weights.items():
        assert np.array_equal(again.params.weights[name], w)


# -- training ---------------------------------------------------------------

def _toy_corpus(n_groups=2, per_group=4, size=12):
    rng = np.random.default_rng(11)
    items = []
    for g in range(n_groups):
        proto = np.zeros((size, size))
        if g == 0:
            proto[size // 2 - 2 : size // 2 + 2, size // 2 - 2 : size // 2 + 2] = 1.0
        else:
            proto[1:3, :] = 1.0
        for i in range(per_group):
            img = np.clip(proto + 0.05 * rng.standard_normal((size, size)), 0, 1)
            items.append(CorpusItem(id=f"g{g}i{i}", image=img, label=str(g)))
    corpus = Corpus(items=items, target_size=(size, size))
    feats = FeatureSet(
        ids=corpus.ids,
        values=np.array([[1.0, 0.0] if it.label == "0" else [0.0, 1.0] for it in items]),
        scheme="landscape",
        mode="sublevel",
        params_echo={"scheme": "landscape", "mode": "sublevel"},
    )
    return corpus, feats


def test_train_separates_groups():
    corpus, feats = _toy_corpus()
    spec = AugmentationSpec(h_flip=True, v_flip=True, rotation_deg=(0, 20), crop_min_area_fraction=None)
    config = TrainConfig(epochs=30, batch_size=8, learning_rate=0.1, seed=0)
    ckpt = train_ssl(corpus, feats, spec, config, widths=(2, 3, 4))
    emb = embed_corpus(ckpt, corpus, feats)
    labels = [it.label for it in corpus.items]
    sims = emb.rows @ emb.rows.T
    intra, inter = [], []
    n = len(labels)
    for i in range(n):
        for j in range(i + 1, n):
            (intra if labels[i] == labels[j] else inter).append(sims[i, j])
    assert np.mean(intra) - np.mean(inter) > 0.2
    assert ckpt.meta["loss_curve"][-1] < ckpt.meta["loss_curve"][0]


def test_train_deterministic():
    corpus, feats = _toy_corpus()
    spec = AugmentationSpec(rotation_deg=(0, 10))
    config = TrainConfig(epochs=3, batch_size=4, seed=7)
    a = train_ssl(corpus, feats, spec, config, widths=(2, 2, 3))
    b = train_ssl(corpus, feats, spec, config, widths=(2, 2, 3))
    for name in a.params.weights:
        assert np.array_equal(a.params.weights[name], b.params.weights[name])
    assert a.meta["loss_curve"] == b.meta["loss_curve"]


def test_embed_rejects_mode_mismatch():
    corpus, feats = _toy_corpus()
    config = TrainConfig(epochs=1, batch_size=4, seed=1)
    ckpt = train_ssl(corpus, feats, AugmentationSpec(), config, widths=(2, 2, 3))
    wrong = FeatureSet(
        ids=feats.ids,
        values=feats.values,
        scheme="landscape",
        mode="distance",
        params_echo={"scheme": "landscape", "mode": "distance"},
    )
    with pytest.raises(ValueError, match="mode"):
        embed_corpus(ckpt, corpus, wrong)


def test_distill_matches_teacher():
    corpus, feats = _toy_corpus()
    config = TrainConfig(epochs=20, batch_size=8, learning_rate=0.1, seed=2)
    teacher_ckpt = train_ssl(corpus, feats, AugmentationSpec(rotation_deg=(0, 15)), config, widths=(2, 3, 4))
    teacher = embed_corpus(teacher_ckpt, corpus, feats)
    student_ckpt = distill(teacher, corpus, feats, TrainConfig(epochs=60, batch_size=8, learning_rate=0.1, seed=3))
    student = embed_corpus(student_ckpt, corpus, feats)
    cos = (student.rows * teacher.rows).sum(axis=1)
    assert cos.mean() > 0.95


def test_train_validates_config():
    corpus, feats = _toy_corpus()
    with pytest.raises(ValueError):
        train_ssl(corpus, feats, AugmentationSpec(), TrainConfig(batch_size=1))
    with pytest.raises(ValueError):
        train_ssl(corpus, feats, AugmentationSpec(), TrainConfig(batch_size=64))
