import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybolib import kernels
from hybolib import manifold as mf

IMPLS = kernels.implementations()
backends = pytest.mark.parametrize("name", sorted(IMPLS))


def test_compiled_backend_present():
    # the build ships the extension; the fallback still works without it
    assert kernels.BACKEND in IMPLS


@backends
def test_pairwise_inner_matches_manifold(name):
    rng = np.random.default_rng(0)
    X, Y = mf.random_point(4, rng=rng, size=5), mf.random_point(4, rng=rng, size=7)
    got = IMPLS[name].pairwise_inner(X, Y)
    np.testing.assert_allclose(got, mf.lorentz_inner(X[:, None], Y[None]), rtol=1e-13)


@backends
def test_pairwise_inner_width_mismatch(name):
    with pytest.raises(ValueError):
        IMPLS[name].pairwise_inner(np.ones((2, 3)), np.ones((2, 4)))


@backends
def test_filtered_ranks_oracle(name):
    scores = np.array([[0.9, 0.5, 0.7, 0.1],
                       [0.2, 0.8, 0.8, 0.8]])
    targets = np.array([2, 1], dtype=np.int64)
    none = np.zeros(3, np.int64), np.zeros(0, np.int64)
    # row 0: one larger; row 1: three-way tie -> mean rank 2
    np.testing.assert_allclose(IMPLS[name].filtered_ranks(scores, targets, *none), [2.0, 2.0])
    indptr = np.array([0, 1, 3], np.int64)
    indices = np.array([0, 2, 1], np.int64)   # row 1 tries to filter its own target
    np.testing.assert_allclose(IMPLS[name].filtered_ranks(scores, targets, indptr, indices), [1.0, 1.5])


@backends
def test_filtered_ranks_target_range(name):
    with pytest.raises(IndexError):
        IMPLS[name].filtered_ranks(np.zeros((1, 3)), np.array([3]), np.zeros(2, np.int64), np.zeros(0, np.int64))


@backends
def test_clip_row_norms(name):
    S = np.array([[3.0, 4.0], [0.3, 0.4]])
    IMPLS[name].clip_row_norms(S, 1.5)
    np.testing.assert_allclose(np.linalg.norm(S, axis=1), [1.5, 0.5])
    np.testing.assert_allclose(S[0], [0.9, 1.2])


def test_clip_requires_contiguous_float():
    with pytest.raises(TypeError):
        kernels.clip_row_norms(np.ones((3, 2), dtype=np.int64), 1.0)
    with pytest.raises(TypeError):
        kernels.clip_row_norms(np.ones((2, 3))[:, :2], 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(2, 12))
def test_backends_agree(seed, nq, ne):
    if len(IMPLS) < 2:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(seed)
    py, cy = IMPLS["python"], IMPLS["cython"]
    X, Y = rng.standard_normal((nq, 3)), rng.standard_normal((ne, 3))
    np.testing.assert_allclose(cy.pairwise_inner(X, Y), py.pairwise_inner(X, Y), rtol=1e-12, atol=1e-12)
    # coarse scores so ties actually occur
    scores = rng.integers(0, 4, (nq, ne)).astype(np.float64)
    targets = rng.integers(0, ne, nq).astype(np.int64)
    counts = rng.integers(0, ne, nq)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    indices = np.concatenate([rng.choice(ne, c, replace=False) for c in counts] + [np.zeros(0)]).astype(np.int64)
    np.testing.assert_array_equal(cy.filtered_ranks(scores, targets, indptr, indices),
                                  py.filtered_ranks(scores, targets, indptr, indices))
    S = rng.standard_normal((nq, 4)) * 3
    a, b = S.copy(), S.copy()
    cy.clip_row_norms(a, 1.5)
    py.clip_row_norms(b, 1.5)
    np.testing.assert_allclose(a, b, rtol=1e-14)


def test_f32_kernels_keep_dtype():
    X = np.ones((2, 3), np.float32)
    assert kernels.pairwise_inner(X, X).dtype == np.float32
    S = np.full((2, 3), 2.0, np.float32)
    kernels.clip_row_norms(S, 1.0)
    assert S.dtype == np.float32
    np.testing.assert_allclose(np.linalg.norm(S, axis=1), 1.0, rtol=1e-6)
