import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mtdepth.calibrate import CalibParams
from mtdepth.config import PipelineConfig
from mtdepth.errors import NumericalError
from mtdepth.graphopt import SegmentGraph, build_graph, knn_edges, lift_to_pixels, objective, propagate
from mtdepth.grid import ScalarGrid
from mtdepth.segmentation import SegmentMap, relabel_external
from oracles import dense_propagation


def _fake_segments(centroids):
    centroids = np.asarray(centroids, dtype=float)
    n = len(centroids)
    return SegmentMap(np.arange(n).reshape(1, n), np.ones(n, dtype=np.int64), centroids)


def _params(theta, anchored):
    return [CalibParams(float(a), float(b), bool(q)) for (a, b), q in zip(theta, anchored)]


def random_connected_graph(rng, n, p_extra=0.15):
    """Random spanning tree plus extra edges, random positive weights."""
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.add((u, v))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.uniform() < p_extra:
                edges.add((i, j))
    edges = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    weights = rng.uniform(0.05, 1.0, size=len(edges))
    return edges, weights


def test_two_segments_single_edge():
    g = build_graph(_fake_segments([[0, 0], [3, 4]]), _params([[1, 0], [1, 0]], [1, 0]), 8)
    assert g.edges.tolist() == [[0, 1]]
    assert g.tau == 5.0
    assert g.weights[0] == pytest.approx(math.exp(-1), rel=1e-15)


def test_single_segment_no_edges():
    g = build_graph(_fake_segments([[2, 2]]), _params([[1, 0]], [1]), 8)
    assert len(g.edges) == 0


def test_collinear_knn1_chain():
    g = build_graph(_fake_segments([[0, 0], [0, 2], [0, 4], [0, 6]]), _params([[1, 0]] * 4, [1, 0, 0, 0]), 1)
    # node 1 and 2 have ties; stable order picks the lower id, the union restores the chain
    assert g.edges.tolist() == [[0, 1], [1, 2], [2, 3]]
    assert g.tau == 2.0
    np.testing.assert_allclose(g.weights, math.exp(-1))


def test_knn_union_symmetric():
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(30, 2))
    edges, lengths = knn_edges(pts, 3)
    assert np.all(edges[:, 0] < edges[:, 1])
    assert len({tuple(e) for e in edges}) == len(edges)
    # every node keeps at least its own 3 nearest neighbours
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    np.fill_diagonal(d, np.inf)
    es = {tuple(e) for e in edges}
    for i in range(30):
        for j in np.argsort(d[i], kind="stable")[:3]:
            assert (min(i, j), max(i, j)) in es
    np.testing.assert_allclose(lengths, d[edges[:, 0], edges[:, 1]])


def test_single_anchor_connected_graph_copies_anchor():
    rng = np.random.default_rng(1)
    edges, w = random_connected_graph(rng, 12)
    theta = np.zeros((12, 2))
    theta[5] = [0.7, -0.2]
    anchored = np.zeros(12, dtype=bool)
    anchored[5] = True
    g = SegmentGraph(_params(theta, anchored), np.zeros((12, 2)), edges, w, 1.0)
    res = propagate(g)
    got = np.array([[p.a, p.b] for p in res.params])
    np.testing.assert_allclose(got, np.tile([0.7, -0.2], (12, 1)), atol=1e-12)
    assert objective(g, got) <= 1e-20


def test_equal_anchors_give_constant_solution():
    rng = np.random.default_rng(2)
    edges, w = random_connected_graph(rng, 10)
    anchored = np.zeros(10, dtype=bool)
    anchored[[0, 7]] = True
    theta = np.where(anchored[:, None], [[2.0, 0.5]], 0.0)
    res = propagate(SegmentGraph(_params(theta, anchored), np.zeros((10, 2)), edges, w, 1.0))
    np.testing.assert_allclose([[p.a, p.b] for p in res.params], np.tile([2.0, 0.5], (10, 1)), atol=1e-10)


def test_path_graph_dense_oracle():
    edges = np.array([[0, 1], [1, 2]])
    w = np.ones(2)
    theta = np.array([[0.0, 0.0], [9.0, 9.0], [1.0, 1.0]])
    anchored = np.array([True, False, True])
    res = propagate(SegmentGraph(_params(theta, anchored), np.zeros((3, 2)), edges, w, 1.0))
    expect = dense_propagation(3, edges, w, anchored, np.where(anchored[:, None], theta, 0))
    got = np.array([[p.a, p.b] for p in res.params])
    np.testing.assert_allclose(got, expect, atol=1e-12)
    assert 0.0 < got[1, 0] < 1.0
    # 2A - B = 0, 2B - A - C = 0, 2C - B = 1
    np.testing.assert_allclose(got[:, 0], [0.25, 0.5, 0.75], atol=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_propagate_matches_dense_solve(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 51))
    edges, w = random_connected_graph(rng, n, p_extra=float(rng.uniform(0, 0.2)))
    anchored = rng.uniform(size=n) < 0.3
    anchored[rng.integers(0, n)] = True
    theta = rng.normal(size=(n, 2))
    res = propagate(SegmentGraph(_params(theta, anchored), np.zeros((n, 2)), edges, w, 1.0))
    got = np.array([[p.a, p.b] for p in res.params])
    expect = dense_propagation(n, edges, w, anchored, theta)
    assert np.abs(got - expect).max() <= 1e-7 * max(1.0, np.abs(expect).max())
    # maximum principle per coordinate
    for k in range(2):
        lo, hi = theta[anchored, k].min(), theta[anchored, k].max()
        assert np.all(got[:, k] >= lo - 1e-9) and np.all(got[:, k] <= hi + 1e-9)


def test_strong_anchor_fidelity():
    rng = np.random.default_rng(5)
    edges, w = random_connected_graph(rng, 20)
    anchored = rng.uniform(size=20) < 0.4
    anchored[0] = True
    theta = rng.normal(size=(20, 2))
    res = propagate(SegmentGraph(_params(theta, anchored), np.zeros((20, 2)), edges, w, 1.0), anchor_weight=1e6)
    got = np.array([[p.a, p.b] for p in res.params])
    assert np.abs(got[anchored] - theta[anchored]).max() < 1e-4


def test_orphan_component_gets_anchor_mean():
    edges = np.array([[0, 1], [2, 3]])
    theta = np.array([[1.0, 0.0], [0, 0], [0, 0], [0, 0]])
    anchored = np.array([True, False, False, False])
    res = propagate(SegmentGraph(_params(theta, anchored), np.zeros((4, 2)), edges, np.ones(2), 1.0))
    assert res.warning and res.orphan_nodes.tolist() == [2, 3]
    assert [(p.a, p.b) for p in res.params] == [(1.0, 0.0)] * 4


def test_no_anchor_is_numerical_error():
    g = SegmentGraph(_params(np.zeros((2, 2)), [False, False]), np.zeros((2, 2)), np.array([[0, 1]]), np.ones(1), 1.0)
    with pytest.raises(NumericalError):
        propagate(g)


def test_lift_identical_params_and_holes():
    cfg = PipelineConfig()
    rng = np.random.default_rng(0)
    d = rng.uniform(1, 2, size=(5, 6))
    valid = np.ones_like(d, dtype=bool)
    valid[2, 3] = False
    labels = np.zeros((5, 6), dtype=np.int64)
    labels[:, 3:] = 1
    seg = relabel_external(labels)
    p = CalibParams(0.3, 0.05, True)
    z = lift_to_pixels(seg, [p, p], ScalarGrid(d, valid), cfg)
    expect = 1.0 / (0.3 * d + 0.05) - cfg.epsilon
    assert not z.valid[2, 3]
    np.testing.assert_allclose(z.values[valid], expect[valid], rtol=1e-14)
