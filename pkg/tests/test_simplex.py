import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonatomic_eq import simplex as sx
from oracles import project_bisection

vectors = st.integers(2, 6).flatmap(
    lambda n: st.lists(st.floats(-3, 3, allow_nan=False), min_size=n, max_size=n)
)


def test_simplex_point_rejects_bad_input():
    with pytest.raises(sx.SimplexError):
        sx.simplex_point([1.0])
    with pytest.raises(sx.SimplexError):
        sx.simplex_point([0.7, 0.7])
    with pytest.raises(sx.SimplexError):
        sx.simplex_point([1.5, -0.5])
    assert sx.simplex_point([0.3, 0.7]).sum() == pytest.approx(1.0, abs=1e-15)


def test_distance_examples():
    assert sx.distance([0.2, 0.8], [0.2, 0.8]) == 0
    assert sx.distance([1, 0], [0, 1]) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert sx.distance([0.5, 0.5], [0.75, 0.25]) == pytest.approx(0.3535533905932738, abs=1e-12)
    with pytest.raises(sx.SimplexError):
        sx.distance([1, 0], [1, 0, 0])


def test_project_examples():
    assert np.allclose(sx.project([0.3, 0.7]), [0.3, 0.7])
    assert np.allclose(sx.project([2, 0]), [1, 0])
    assert np.allclose(sx.project([0.6, 0.6]), [0.5, 0.5])
    assert np.allclose(sx.project([0.2, -0.3, 1.4]), [0, 0, 1])
    with pytest.raises(sx.SimplexError):
        sx.project([np.nan, 1.0])


@given(vectors)
def test_project_matches_bisection_oracle(v):
    assert np.allclose(sx.project(v), project_bisection(v), atol=1e-9)


@given(vectors)
def test_project_is_idempotent(v):
    p = sx.project(v)
    assert np.allclose(sx.project(p), p, atol=1e-14)


def test_project_minimizes_over_simplex():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        v = rng.normal(size=n)
        p = sx.project(v)
        W = rng.dirichlet(np.ones(n), size=1000)
        assert np.linalg.norm(p - v) <= np.min(np.linalg.norm(W - v, axis=1)) + 1e-12


def test_distance_to_set_examples():
    assert sx.distance_to_set([0.3, 0.7], sx.whole_simplex(2)) == 0
    assert sx.distance_to_set([1, 0], sx.VertexHull(((0.5, 0.5),))) == pytest.approx(math.sqrt(2) / 2, abs=1e-9)
    assert sx.distance_to_set([1, 0], sx.lower_bounded(2, 0.25)) == pytest.approx(0.25 * math.sqrt(2), abs=1e-12)


def test_lower_bounded_range_checked():
    with pytest.raises(sx.SimplexError):
        sx.lower_bounded(3, 0.5)
    with pytest.raises(sx.SimplexError):
        sx.Box((0.6, 0.6), (1, 1))


def test_vertex_hull_distance_matches_dense_sampling():
    rng = np.random.default_rng(3)
    for _ in range(20):
        V = rng.dirichlet(np.ones(3), size=3)
        hull = sx.VertexHull(tuple(map(tuple, V)))
        x = rng.dirichlet(np.ones(3))
        W = rng.dirichlet(np.ones(3), size=20000) @ V
        assert sx.distance_to_set(x, hull) <= np.min(np.linalg.norm(W - x, axis=1)) + 1e-9


def test_grid_examples():
    assert sx.grid(2, 0.5).tolist() == [[0, 1], [0.5, 0.5], [1, 0]]
    assert sx.grid(2, 1).tolist() == [[0, 1], [1, 0]]
    assert len(sx.grid(3, 0.5)) == 6 == sx.grid_size(3, 0.5)
    with pytest.raises(sx.SimplexError):
        sx.grid(2, 0)


@settings(max_examples=50)
@given(st.integers(2, 4), st.sampled_from([0.5, 0.25, 0.2, 0.1]), st.integers(0, 10**6))
def test_grid_coverage(n, h, seed):
    x = np.random.default_rng(seed).dirichlet(np.ones(n))
    G = sx.grid(n, h)
    assert np.min(np.linalg.norm(G - x, axis=1)) <= math.sqrt(n) * h


def test_rows_onto_faces_respects_support():
    v = np.array([[0.4, 0.4, 0.4], [1.0, -1.0, 0.5]])
    support = np.array([[True, False, True], [False, True, True]])
    out = sx.project_rows_onto_faces(v, support)
    assert np.allclose(out.sum(axis=1), 1)
    assert np.all(out[~support] == 0)
    assert np.allclose(out[0], [0.5, 0, 0.5])
