import numpy as np
import pytest

from wafertopo import tdamap
from wafertopo.sslnet import EmbeddingMatrix
from wafertopo.tdamap import (
    NOISE,
    TdaMapConfig,
    build_map,
    cluster_map,
    export_graphml,
    grid_search,
    lens_project,
    pairwise_distance,
    score_map,
)


def _emb(rows, prefix="x"):
    rows = np.asarray(rows, dtype=float)
    return EmbeddingMatrix(ids=[f"{prefix}{i}" for i in range(rows.shape[0])], rows=rows)


def _blobs(seed=0, n=60, d=8, k=3, spread=0.05):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(k, d)) * 3
    rows, labels = [], []
    for i in range(n):
        g = i % k
        rows.append(centers[g] + spread * rng.standard_normal(d))
        labels.append(g)
    return _emb(np.array(rows)), labels


def test_pairwise_trivial_examples():
    e1 = np.array([1.0, 0.0])
    e2 = np.array([0.0, 1.0])
    emb = _emb([e1, e2])
    d_euc = pairwise_distance(emb, "euclidean")
    d_cos = pairwise_distance(emb, "cosine")
    assert d_euc[0, 1] == pytest.approx(np.sqrt(2))
    assert d_cos[0, 1] == pytest.approx(1.0)
    assert np.allclose(np.diag(d_euc), 0) and np.allclose(np.diag(d_cos), 0)


def test_pairwise_cosine_rejects_zero_rows():
    with pytest.raises(ValueError):
        pairwise_distance(_emb([[0.0, 0.0], [1.0, 0.0]]), "cosine")


def test_lens_rotation_invariant_euclidean():
    emb, _ = _blobs(seed=1, n=40, d=4)
    theta = 0.7
    rot4 = np.eye(4)
    rot4[:2, :2] = [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    rotated = _emb(emb.rows @ rot4.T)
    a = lens_project(emb, "euclidean")
    b = lens_project(rotated, "euclidean")
    assert np.allclose(a, b, atol=1e-8)


def test_lens_deterministic():
    emb, _ = _blobs(seed=2)
    assert np.array_equal(lens_project(emb, "euclidean"), lens_project(emb, "euclidean"))


def test_coverage_every_item_in_some_node():
    emb, _ = _blobs(seed=3)
    m = build_map(emb, TdaMapConfig())
    covered = set()
    for nd in m.nodes:
        covered.update(nd.members)
    assert covered == set(range(len(emb.ids)))


def test_edges_are_sound():
    emb, _ = _blobs(seed=4)
    m = build_map(emb, TdaMapConfig())
    member_sets = {nd.node_id: set(nd.members) for nd in m.nodes}
    for a, b, c in m.edges:
        shared = member_sets[a] & member_sets[b]
        assert len(shared) == c
        assert c > 0


def test_assignments_partition():
    emb, _ = _blobs(seed=5)
    config = TdaMapConfig()
    m = build_map(emb, config)
    assignments = cluster_map(m, config)
    assert assignments.shape == (len(emb.ids),)
    assert ((assignments >= 0) | (assignments == NOISE)).all()
    non_noise = np.unique(assignments[assignments != NOISE])
    assert np.array_equal(non_noise, np.arange(len(non_noise)))


def test_blobs_recovered():
    emb, labels = _blobs(seed=6, spread=0.02)
    config = TdaMapConfig(beta=3.5)
    m = build_map(emb, config)
    assignments = cluster_map(m, config)
    # each true blob maps into exactly one cluster
    for g in set(labels):
        got = {a for a, lab in zip(assignments, labels) if lab == g and a != NOISE}
        assert len(got) == 1
    assert len(np.unique(assignments[assignments != NOISE])) == 3


def test_cosine_scale_invariance():
    emb, _ = _blobs(seed=7)
    config = TdaMapConfig(metric="cosine")
    a = cluster_map(build_map(emb, config), config)
    scaled = _emb(emb.rows * 17.0)
    b = cluster_map(build_map(scaled, config), config)
    assert np.array_equal(a, b)


def test_permutation_equivariance():
    emb, _ = _blobs(seed=8, n=30)
    config = TdaMapConfig()
    base = cluster_map(build_map(emb, config), config)
    rng = np.random.default_rng(0)
    perm = rng.permutation(len(emb.ids))
    permuted = EmbeddingMatrix(ids=[emb.ids[i] for i in perm], rows=emb.rows[perm])
    out = cluster_map(build_map(permuted, config), config)
    # same partition up to relabeling
    from oracles import pair_counting_ari

    assert pair_counting_ari(base[perm].tolist(), out.tolist()) == pytest.approx(1.0)


def test_score_two_separated_blobs():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((20, 4)) * 0.1
    b = rng.standard_normal((20, 4)) * 0.1 + 10.0
    emb = _emb(np.vstack([a, b]))
    good = np.array([0] * 20 + [1] * 20)
    shuffled = good.copy()
    rng.shuffle(shuffled)
    assert score_map(emb, good, "euclidean") < score_map(emb, shuffled, "euclidean")


def test_score_singletons_zero():
    emb = _emb([[0.0, 0.0], [1.0, 0.0]])
    assignments = np.array([0, 1])
    assert score_map(emb, assignments, "euclidean") == 0.0


def test_score_single_cluster_inf():
    emb, _ = _blobs(seed=10)
    assert np.isinf(score_map(emb, np.zeros(len(emb.ids), dtype=int), "euclidean"))


def test_grid_search_table_and_validation():
    emb, _ = _blobs(seed=11)
    best, table = grid_search(emb, [3.5, 10.0], ["euclidean", "cosine"])
    assert len(table) == 4
    assert best.assignments is not None
    with pytest.raises(ValueError):
        grid_search(emb, [], ["euclidean"])
    with pytest.raises(ValueError):
        TdaMapConfig(overlap=0.6).validate()


def test_single_item_map():
    m = build_map(_emb([[1.0, 2.0]]), TdaMapConfig())
    assert len(m.nodes) == 1 and m.nodes[0].members == [0]


def test_export_graphml(tmp_path):
    import networkx as nx

    emb, labels = _blobs(seed=12, n=30)
    config = TdaMapConfig()
    m = build_map(emb, config)
    cluster_map(m, config)
    path = tmp_path / "m.graphml"
    export_graphml(m, path, labels=[str(g) for g in labels])
    g = nx.read_graphml(path)
    assert g.number_of_nodes() == len(m.nodes)
    node0 = g.nodes[str(m.nodes[0].node_id)]
    assert node0["size"] == len(m.nodes[0].members)
    assert "dominant_label" in node0
