import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from hybolib import manifold as mf
from hybolib.manifold import ManifoldError

curvatures = st.sampled_from([-1.0, -0.5, -2.0])
dims = st.integers(2, 8)
seeds = st.integers(0, 2**32 - 1)


def test_inner_product_oracle():
    o = mf.origin(2)
    p = np.array([math.cosh(1), math.sinh(1), 0.0])
    assert mf.lorentz_inner(o, p) == pytest.approx(-math.cosh(1))


def test_squared_distance_oracle():
    o = mf.origin(2)
    p = np.array([math.cosh(1), math.sinh(1), 0.0])
    assert mf.squared_distance(o, p) == pytest.approx(2 * math.cosh(1) - 2, rel=1e-14)
    assert mf.squared_distance(o, p) == pytest.approx(1.0861612696304874)
    assert mf.distance(o, p) == pytest.approx(1.0)


def test_origin_scales_with_curvature():
    o = mf.origin(3, K=-0.25)
    np.testing.assert_allclose(o, [2.0, 0, 0, 0])
    assert mf.on_manifold(o, K=-0.25)


def test_positive_curvature_rejected():
    with pytest.raises(ManifoldError):
        mf.origin(2, K=1.0)


def test_boost_oracle():
    B = mf.boost_matrix(np.array([0.6, 0.0]))
    np.testing.assert_allclose(B @ mf.origin(2), [1.25, -0.75, 0.0], atol=1e-15)


def test_boost_speed_limit():
    with pytest.raises(ManifoldError):
        mf.boost_matrix(np.array([0.8, 0.6]))


def test_rotation_rejects_reflection():
    with pytest.raises(ManifoldError):
        mf.rotation_matrix(np.diag([1.0, -1.0]))


def test_exp_map_zero_tangent_returns_base():
    x = mf.random_point(3, rng=np.random.default_rng(0))
    np.testing.assert_array_equal(mf.exp_map(x, np.zeros(4)), x)


def test_exp_map_rejects_timelike():
    with pytest.raises(ManifoldError):
        mf.exp_map(mf.origin(2), np.array([1.0, 0.0, 0.0]))


def test_log_map_same_point_is_zero():
    x = mf.random_point(4, rng=np.random.default_rng(1))
    np.testing.assert_array_equal(mf.log_map(x, x), np.zeros(5))


def test_exp_origin_along_axis():
    z = np.array([0.0, 1.0, 0.0])
    np.testing.assert_allclose(mf.exp_map0(z), [math.cosh(1), math.sinh(1), 0.0], rtol=1e-15)


@settings(max_examples=80, deadline=None)
@given(dims, curvatures, seeds)
def test_random_points_on_manifold(n, K, seed):
    rng = np.random.default_rng(seed)
    x = mf.random_point(n, K, scale=2.0, rng=rng, size=5)
    assert np.all(mf.manifold_error(x, K) < 1e-9)
    assert np.all(x[..., 0] > 0)


@settings(max_examples=80, deadline=None)
@given(dims, curvatures, seeds, st.floats(0.01, 5.0))
def test_exp_log_roundtrip(n, K, seed, length):
    rng = np.random.default_rng(seed)
    x = mf.random_point(n, K, rng=rng)
    z = mf.random_tangent(x, K, rng=rng)
    zn = math.sqrt(max(mf.lorentz_inner(z, z), 0.0))
    assume(zn > 1e-6)
    z *= length / (math.sqrt(-K) * zn)
    y = mf.exp_map(x, z, K)
    assert mf.manifold_error(y, K) < 1e-9
    back = mf.log_map(x, y, K)
    assert np.linalg.norm(back - z) / np.linalg.norm(z) < 1e-8
    # geodesic length matches the tangent norm
    assert mf.distance(x, y, K) == pytest.approx(length / math.sqrt(-K), rel=1e-8)


@settings(max_examples=60, deadline=None)
@given(dims, curvatures, seeds)
def test_log_tangent_and_distance(n, K, seed):
    rng = np.random.default_rng(seed)
    x, y = mf.random_point(n, K, rng=rng), mf.random_point(n, K, rng=rng)
    v = mf.log_map(x, y, K)
    assert abs(mf.lorentz_inner(x, v)) < 1e-9 * max(1.0, np.max(np.abs(x)) * np.max(np.abs(v)))
    assert math.sqrt(max(mf.lorentz_inner(v, v), 0)) == pytest.approx(mf.distance(x, y, K), rel=1e-7)


@settings(max_examples=60, deadline=None)
@given(dims, seeds)
def test_distance_symmetric_nonnegative(n, seed):
    rng = np.random.default_rng(seed)
    x, y = mf.random_point(n, rng=rng), mf.random_point(n, rng=rng)
    assert mf.squared_distance(x, y) == pytest.approx(mf.squared_distance(y, x))
    assert mf.squared_distance(x, y) >= 0
    assert mf.squared_distance(x, x) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(dims, seeds)
def test_boosts_and_rotations_are_isometries(n, seed):
    rng = np.random.default_rng(seed)
    B = mf.boost_matrix(mf.random_velocity(n, rng))
    R = mf.rotation_matrix(mf.random_special_orthogonal(n, rng))
    x, y = mf.random_point(n, rng=rng), mf.random_point(n, rng=rng)
    for A in (B, R):
        assert mf.manifold_error(A @ x) < 1e-9
        assert mf.lorentz_inner(A @ x, A @ y) == pytest.approx(mf.lorentz_inner(x, y), rel=1e-9)


def test_project_to_hyperboloid_time():
    s = np.array([[3.0, 4.0]])
    np.testing.assert_allclose(mf.project_to_hyperboloid(s), [[math.sqrt(26), 3.0, 4.0]])
