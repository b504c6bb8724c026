import numpy as np
import pytest
from PIL import Image

from wafertopo.manifest import read_manifest
from wafertopo.synthgen import (
    SWED_PALETTE,
    SpvdConfig,
    SwedConfig,
    gen_spvd_dataset,
    gen_spvd_image,
    gen_swed_dataset,
    gen_swed_grid,
    render_swed,
)
from wafertopo.types import SWED_CLASSES


def test_spvd_image_shape_and_mask():
    img = gen_spvd_image(seed=5, is_faulty=True)
    assert img.shape == (400, 400, 3)
    yy, xx = np.mgrid[0:400, 0:400]
    outside = (yy - 200.0) ** 2 + (xx - 200.0) ** 2 > 200.0**2
    assert (img[outside] == 0).all()


def test_spvd_deterministic():
    a = gen_spvd_image(seed=11, is_faulty=False)
    b = gen_spvd_image(seed=11, is_faulty=False)
    assert np.array_equal(a, b)
    c = gen_spvd_image(seed=12, is_faulty=False)
    assert not np.array_equal(a, c)


def test_spvd_fault_is_local():
    good = gen_spvd_image(seed=3, is_faulty=False)
    faulty = gen_spvd_image(seed=3, is_faulty=True)
    diff = np.abs(good.astype(int) - faulty.astype(int)).sum(axis=2)
    ys, xs = np.nonzero(diff)
    assert ys.size > 0
    r = np.hypot(ys - 200.0, xs - 200.0)
    assert r.min() >= 140.0
    assert r.max() <= 200.0


def test_spvd_dataset_small(tmp_path):
    manifest = gen_spvd_dataset(SpvdConfig(image_count=6, faulty_fraction=0.5, seed=1), tmp_path)
    assert len(manifest.entries) == 6
    labels = [e.label for e in manifest.entries]
    assert labels.count("good") == 3 and labels.count("faulty") == 3
    reread = read_manifest(tmp_path / "manifest.csv")
    for e in reread.entries:
        assert reread.resolve(e).exists()


def test_swed_grid_values_and_radius():
    config = SwedConfig()
    for cls in SWED_CLASSES:
        grid = gen_swed_grid(cls, seed=2, config=config)
        assert grid.cells.shape == (128, 128)
        assert set(np.unique(grid.cells)) <= {0, 1, 2}
        yy, xx = np.mgrid[0:128, 0:128]
        c = (128 - 1) / 2.0
        r = np.hypot(yy - c, xx - c)
        radius = 0.94 * 64
        assert (grid.cells[r > radius] == 0).all()
        assert (grid.cells[r <= radius] != 0).all()


def test_swed_none_has_no_fail():
    grid = gen_swed_grid("None", seed=9)
    assert not (grid.cells == 2).any()


def test_swed_deterministic():
    a = gen_swed_grid("Scratch", seed=4)
    b = gen_swed_grid("Scratch", seed=4)
    assert np.array_equal(a.cells, b.cells)


def test_swed_render_palette_only():
    grid = gen_swed_grid("Donut", seed=1)
    rgb = render_swed(grid)
    colors = {tuple(c) for c in rgb.reshape(-1, 3)}
    palette = {tuple(c) for c in SWED_PALETTE}
    assert colors <= palette


def test_swed_unknown_class_rejected():
    with pytest.raises(ValueError):
        gen_swed_grid("Spiral", seed=0)


def test_swed_dataset_small(tmp_path):
    manifest = gen_swed_dataset(SwedConfig(per_class_count=2, seed=8), tmp_path)
    assert len(manifest.entries) == 2 * len(SWED_CLASSES)
    labels = [e.label for e in manifest.entries]
    for cls in SWED_CLASSES:
        assert labels.count(cls) == 2
    sample = manifest.resolve(manifest.entries[0])
    with Image.open(sample) as im:
        assert im.size == (128, 128)


def test_swed_dataset_regeneration_byte_identical(tmp_path):
    config = SwedConfig(per_class_count=1, seed=13)
    gen_swed_dataset(config, tmp_path / "a")
    gen_swed_dataset(config, tmp_path / "b")
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file():
            twin = tmp_path / "b" / f.relative_to(tmp_path / "a")
            assert twin.read_bytes() == f.read_bytes(), f.name
