import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dechodge import linalg
from dechodge.errors import AmbiguousRank, Inconsistent
from dechodge.mesh import boundary_matrix

from conftest import get_mesh, get_ops


def test_zero_matrix():
    dec, Q = linalg.rank_nullspace(np.zeros((3, 3)))
    assert dec.rank == 0 and Q.shape == (3, 3)


def test_cycle_graph_nullspace():
    B = boundary_matrix(get_mesh("circle", n=4), 1)
    dec, Q = linalg.rank_nullspace(B)
    assert dec.rank == 3 and Q.shape[1] == 1
    assert np.allclose(np.abs(Q[:, 0]), 0.5)


def test_d0_annulus_constants():
    ops = get_ops("annulus", n_theta=16, n_r=4)
    dec, Q = linalg.rank_nullspace(ops.d[0])
    assert Q.shape[1] == 1
    assert np.allclose(Q[:, 0], Q[0, 0])


def test_ambiguous_rank():
    with pytest.raises(AmbiguousRank):
        linalg.rank(np.diag([1.0, 2e-9, 5e-10]))
    dec = linalg.rank(np.diag([1.0, 2e-9, 5e-10]), strict=False)
    assert dec.ambiguous


def test_rank_transpose_agrees():
    ops = get_ops("disk", n=16)
    for p in range(2):
        assert linalg.rank(ops.d[p]).rank == linalg.rank(ops.d[p].T).rank


def test_nullspace_residual_and_count():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((5, 3)) @ rng.standard_normal((3, 9))
    dec, Q = linalg.rank_nullspace(A)
    assert dec.rank == 3 and dec.rank + Q.shape[1] == 9
    assert np.allclose(Q.T @ Q, np.eye(6), atol=1e-12)
    assert np.linalg.norm(A @ Q, axis=0).max() <= 1e-9 * np.linalg.norm(A, 2)


def test_least_norm_examples():
    b = np.array([3.0, -1.0, 2.0])
    assert np.allclose(linalg.least_norm_solve(sp.identity(3), b), b)
    assert np.allclose(linalg.least_norm_solve(np.array([[1.0, 1.0]]), np.array([2.0])), [1, 1])
    with pytest.raises(Inconsistent):
        linalg.least_norm_solve(np.array([[1.0, 0.0], [1.0, 0.0]]), np.array([1.0, 2.0]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(1, 6), extra=st.integers(1, 6))
def test_least_norm_matches_pinv(seed, m, extra):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, m + extra))
    b = rng.standard_normal(m)
    x = linalg.least_norm_solve(A, b)
    assert np.allclose(x, np.linalg.pinv(A) @ b, atol=1e-10)
    # orthogonal to the nullspace
    _, Q = linalg.rank_nullspace(A)
    assert np.abs(Q.T @ x).max() < 1e-10


def test_m_orthonormalize_drops_dependent():
    V = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    Q, dropped = linalg.m_orthonormalize(V, np.ones(3))
    assert Q.shape[1] == 2 and dropped == 1


@settings(max_examples=25, deadline=None)
@given(V=arrays(np.float64, (6, 3), elements=st.floats(-5, 5)),
       w=arrays(np.float64, 6, elements=st.floats(0.1, 10)))
def test_m_orthonormalize_gram(V, w):
    Q, dropped = linalg.m_orthonormalize(V, w)
    G = linalg.m_gram(Q, Q, w)
    assert np.allclose(G, np.eye(Q.shape[1]), atol=1e-12)
    assert Q.shape[1] + dropped == V.shape[1]


def test_intersect_examples():
    e = np.eye(3)
    inter, _ = linalg.intersect_subspaces(e[:, :2], e[:, 1:], np.ones(3))
    assert inter.shape[1] == 1 and np.allclose(np.abs(inter[:, 0]), e[:, 1])
    inter, _ = linalg.intersect_subspaces(e[:, :1], e[:, 1:], np.ones(3))
    assert inter.shape[1] == 0


def test_rank_tolerance_override():
    A = np.diag([1.0, 1e-6])
    assert linalg.rank(A).rank == 2
    old = linalg.RANK_TOL
    try:
        linalg.RANK_TOL = 1e-4
        assert linalg.rank(A).rank == 1
    finally:
        linalg.RANK_TOL = old
