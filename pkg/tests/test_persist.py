import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.ndimage import distance_transform_edt

from oracles import (
    bottleneck_distance,
    brute_force_edt,
    diagrams_equal,
    naive_cubical_persistence,
)
from wafertopo.persist import (
    build_filtration,
    compute_persistence,
    distance_filtration,
    tda_signature,
)
from wafertopo.persist import _reduction_py
from wafertopo.synthgen import gen_swed_grid
from wafertopo.types import WaferGrid


def _package_diagrams(img):
    d0, d1 = compute_persistence(build_filtration(img))
    return (
        np.array(sorted(map(tuple, d0.intervals))).reshape(-1, 2),
        np.array(sorted(map(tuple, d1.intervals))).reshape(-1, 2),
    )


def test_single_pixel():
    d0, d1 = compute_persistence(build_filtration(np.array([[0.3]])))
    assert d0.intervals.tolist() == [[0.3, np.inf]]
    assert d1.intervals.size == 0


def test_two_basins_one_merge():
    img = np.array([[0.0, 1.0, 0.2]])
    d0, _ = compute_persistence(build_filtration(img))
    pairs = sorted(map(tuple, d0.intervals))
    assert pairs == [(0.0, np.inf), (0.2, 1.0)]


def test_ring_has_one_loop():
    img = np.ones((5, 5))
    img[1:4, 1:4] = 0.0
    img[2, 2] = 1.0  # hole floor higher than the ring
    d0, d1 = compute_persistence(build_filtration(img))
    assert len(d1.intervals) == 1
    birth, death = d1.intervals[0]
    assert (birth, death) == (0.0, 1.0)


def test_oracle_equivalence_random():
    rng = np.random.default_rng(123)
    for trial in range(25):
        img = rng.random((7, 7))
        if trial % 4 == 0:
            img = np.round(img * 3) / 3  # exercise tie handling
        p0, p1 = _package_diagrams(img)
        o0, o1 = naive_cubical_persistence(img)
        assert diagrams_equal(p0, o0), f"H0 mismatch on trial {trial}"
        assert diagrams_equal(p1, o1), f"H1 mismatch on trial {trial}"


def test_backends_agree():
    from wafertopo.persist.backend import kernel

    rng = np.random.default_rng(5)
    img = rng.random((16, 16))
    f = build_filtration(img)
    d0a, d1a = compute_persistence(f)

    import wafertopo.persist.filtration as filt

    original = filt.kernel
    try:
        filt.kernel = _reduction_py
        d0b, d1b = compute_persistence(build_filtration(img))
    finally:
        filt.kernel = original
    assert diagrams_equal(
        np.array(sorted(map(tuple, d0a.intervals))), np.array(sorted(map(tuple, d0b.intervals)))
    )
    assert diagrams_equal(
        np.array(sorted(map(tuple, d1a.intervals))), np.array(sorted(map(tuple, d1b.intervals)))
    )


def test_monotone_shift():
    rng = np.random.default_rng(9)
    img = rng.random((10, 10))
    base0, base1 = _package_diagrams(img)
    s0, s1 = _package_diagrams(img + 2.5)
    assert diagrams_equal(s0, base0 + 2.5)
    assert diagrams_equal(s1, base1 + 2.5)


def test_euler_relation():
    # finite + essential pair counts must satisfy chi = V - E + F
    rng = np.random.default_rng(31)
    img = rng.random((9, 9))
    f = build_filtration(img)
    d0, d1 = compute_persistence(f)
    n_essential_h0 = int(np.isinf(d0.intervals[:, 1]).sum())
    assert n_essential_h0 == 1  # connected image
    h, w = img.shape
    v = h * w
    e = h * (w - 1) + (h - 1) * w
    faces = (h - 1) * (w - 1)
    chi = v - e + faces
    # every non-essential cell is paired; chi = essential H0 - essential H1
    assert chi == 1


def test_stability_bottleneck():
    rng = np.random.default_rng(77)
    img = rng.random((8, 8))
    delta = 0.02
    noise = rng.uniform(-delta, delta, size=img.shape)
    a0, a1 = _package_diagrams(img)
    b0, b1 = _package_diagrams(img + noise)
    assert bottleneck_distance(a0, b0) <= delta + 1e-9
    assert bottleneck_distance(a1, b1) <= delta + 1e-9


@settings(max_examples=25, deadline=None)
@given(
    arrays(
        float,
        (5, 5),
        elements=st.floats(min_value=0.0, max_value=1.0, allow_nan=False, width=32),
    )
)
def test_oracle_equivalence_property(img):
    p0, p1 = _package_diagrams(img)
    o0, o1 = naive_cubical_persistence(img)
    assert diagrams_equal(p0, o0)
    assert diagrams_equal(p1, o1)


@settings(max_examples=25, deadline=None)
@given(
    arrays(
        float,
        (6, 6),
        elements=st.floats(min_value=0.0, max_value=1.0, allow_nan=False, width=32),
    )
)
def test_deaths_after_births(img):
    d0, d1 = compute_persistence(build_filtration(img))
    for d in (d0, d1):
        if d.intervals.size:
            assert (d.intervals[:, 1] > d.intervals[:, 0]).all()


def test_distance_filtration_matches_brute_force():
    grid = gen_swed_grid("Loc", seed=3)
    filt = distance_filtration(grid)
    defect = grid.cells == 2
    ref = brute_force_edt(defect)
    assert np.isfinite(ref).all()
    wafer = grid.cells != 0
    ref = np.where(wafer, ref, ref[wafer].max())
    ref = ref / np.hypot(*grid.cells.shape)
    assert np.allclose(filt, ref, atol=1e-9)


def test_distance_filtration_scipy_cross_check():
    grid = gen_swed_grid("Scratch", seed=1)
    defect = grid.cells == 2
    ours = distance_filtration(grid)
    scipy_d = distance_transform_edt(~defect)
    wafer = grid.cells != 0
    assert np.allclose(
        ours[wafer], scipy_d[wafer] / np.hypot(*grid.cells.shape), atol=1e-9
    )


def test_distance_filtration_no_defects():
    grid = WaferGrid(cells=np.ones((6, 6), dtype=np.uint8))
    filt = distance_filtration(grid)
    assert np.allclose(filt, 1.0)


def test_tda_signature_modes():
    grid = gen_swed_grid("Donut", seed=2)
    d0, d1 = tda_signature(grid, mode="distance")
    assert d0.intervals.size > 0
    with pytest.raises(ValueError):
        tda_signature(grid, mode="bogus")
