import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybolib import autodiff as ad
from hybolib import checkpoint
from hybolib import manifold as mf
from hybolib.autodiff import Tensor
from hybolib.layers import (DegenerateInputError, LorentzLinear, LorentzPositionEncoding,
                            LorentzResidual, MultiHeadAttention, attention_weights, centroid,
                            fx_matrix, fx_transform, is_boost, lorentz_attention,
                            pseudo_rotation_composite, pseudo_rotation_matrix,
                            pseudo_rotation_tangent)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 8)
curvatures = st.sampled_from([-1.0, -0.5, -2.0])


def on_manifold(y, K=-1.0, tol=1e-9):
    y = np.asarray(y.data if isinstance(y, Tensor) else y)
    return bool(np.all(mf.manifold_error(y, K) < tol) and np.all(y[..., 0] > 0))


# -- linear layer ----------------------------------------------------------


def test_linear_time_oracle():
    layer = LorentzLinear(3, 3, rng=np.random.default_rng(0))
    layer.v.data[:] = 0.0
    y = layer(mf.random_point(2, rng=np.random.default_rng(1))).data
    assert y[0] == pytest.approx(2.35, rel=1e-14)
    assert np.linalg.norm(y[1:]) == pytest.approx(math.sqrt(2.35**2 - 1), rel=1e-14)
    assert np.linalg.norm(y[1:]) == pytest.approx(2.12662, abs=1e-5)


def test_linear_time_bounded_by_scale():
    rng = np.random.default_rng(2)
    layer = LorentzLinear(4, 5, scale=2.5, rng=rng, init_bound=3.0)
    y = layer(mf.random_point(3, scale=3.0, rng=rng, size=200)).data
    assert np.all(y[:, 0] > layer.eps) and np.all(y[:, 0] <= 2.5 + layer.eps + 1e-12)


def test_linear_degenerate_row_maps_to_origin():
    layer = LorentzLinear(3, 3, rng=np.random.default_rng(0))
    layer.weight.data[:] = 0.0
    y = layer(mf.random_point(2, rng=np.random.default_rng(0), size=2)).data
    np.testing.assert_allclose(y, np.tile(mf.origin(2), (2, 1)))


def test_linear_rejects_bad_eps_and_width():
    with pytest.raises(ValueError):
        LorentzLinear(3, 3, eps=0.5)
    with pytest.raises(ValueError):
        LorentzLinear(3, 3)(np.ones(4))


def test_dropout_only_in_training():
    rng = np.random.default_rng(3)
    layer = LorentzLinear(5, 5, dropout=0.5, rng=rng)
    x = mf.random_point(4, rng=rng, size=3)
    layer.eval()
    a, b = layer(x).data, layer(x).data
    np.testing.assert_array_equal(a, b)
    layer.train()
    mask = np.ones((3, 5))
    np.testing.assert_allclose(layer(x, dropout_mask=mask).data[:, 0], a[:, 0])


@settings(max_examples=60, deadline=None)
@given(dims, dims, curvatures, seeds)
def test_linear_output_on_manifold(n, m, K, seed):
    rng = np.random.default_rng(seed)
    layer = LorentzLinear(n + 1, m + 1, K=K, rng=rng, init_bound=1.0, activation="relu", bias=True)
    assert on_manifold(layer(mf.random_point(n, K, scale=2.0, rng=rng, size=4)), K)


# -- fx transform and the lemmas --------------------------------------------


@settings(max_examples=100, deadline=None)
@given(dims, dims, curvatures, seeds)
def test_theorem1_any_matrix(n, m, K, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((m + 1, n + 1))
    x = mf.random_point(n, K, rng=rng)
    y = fx_transform(M, x, K)
    assert on_manifold(y, K)
    np.testing.assert_allclose(fx_matrix(M, x, K) @ x, y.data, rtol=1e-10)


def test_fx_degenerate_scale_raises():
    M = np.zeros((3, 3))
    M[1:, :] = 1.0
    with pytest.raises(DegenerateInputError):
        fx_transform(M, mf.origin(2))
    assert on_manifold(fx_transform(M, mf.origin(2), strict=False))


@settings(max_examples=60, deadline=None)
@given(dims, seeds)
def test_lemma1_boost_and_rotation_fixed(n, seed):
    rng = np.random.default_rng(seed)
    x = mf.random_point(n, rng=rng)
    B = mf.boost_matrix(mf.random_velocity(n, rng))
    R = mf.rotation_matrix(mf.random_special_orthogonal(n, rng))
    assert np.max(np.abs(fx_matrix(B, x) - B)) < 1e-9
    assert np.max(np.abs(fx_matrix(R, x) - R)) < 1e-9


def test_lemma1_fails_for_generic_matrix():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((3, 3))
    assert np.max(np.abs(fx_matrix(M, mf.random_point(2, rng=rng)) - M)) > 1e-3


@settings(max_examples=60, deadline=None)
@given(dims, curvatures, seeds)
def test_lemma2_three_forms_agree(n, K, seed):
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((n, n))
    x = mf.random_point(n, K, rng=rng)
    H = pseudo_rotation_matrix(W, x, K)
    a = pseudo_rotation_tangent(W, x, K)
    b = pseudo_rotation_composite(W, x, K)
    c = fx_transform(H, x, K).data
    for u, v in ((a, b), (a, c), (b, c)):
        assert np.linalg.norm(u - v) / np.linalg.norm(u) < 1e-8
    np.testing.assert_allclose(fx_matrix(H, x, K), H, atol=1e-9 * np.max(np.abs(H)))
    assert not is_boost(H, tol=1e-6)


def test_pseudo_rotation_identity_is_identity():
    x = mf.random_point(3, rng=np.random.default_rng(5))
    np.testing.assert_allclose(pseudo_rotation_matrix(np.eye(3), x), np.eye(4), atol=1e-12)
    assert is_boost(np.eye(4))


def test_pseudo_rotation_at_origin():
    assert pseudo_rotation_matrix(np.eye(2), mf.origin(2)) is None
    np.testing.assert_allclose(pseudo_rotation_tangent(np.eye(2), mf.origin(2)), mf.origin(2))


# -- centroid and attention -------------------------------------------------


def test_centroid_single_point():
    x = mf.random_point(3, rng=np.random.default_rng(0))
    np.testing.assert_allclose(centroid(np.array([0.7]), x[None]).data, x, rtol=1e-12)


def test_centroid_of_mirror_pair_is_origin():
    p = np.array([math.cosh(1), math.sinh(1), 0.0])
    q = np.array([math.cosh(1), -math.sinh(1), 0.0])
    np.testing.assert_allclose(centroid(np.array([1.0, 1.0]), np.stack([p, q])).data,
                               mf.origin(2), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(dims, curvatures, seeds, st.floats(1e-3, 1e3))
def test_centroid_scale_invariant_and_optimal(n, K, seed, c):
    rng = np.random.default_rng(seed)
    pts = mf.random_point(n, K, rng=rng, size=5)
    w = rng.uniform(0.05, 1.0, 5)
    mu = centroid(w, pts, K).data
    assert on_manifold(mu, K)
    np.testing.assert_allclose(centroid(c * w, pts, K).data, mu, rtol=1e-12)
    obj = lambda y: np.sum(w * mf.squared_distance(pts, y, K))  # noqa: E731
    for y in mf.random_point(n, K, rng=rng, size=50):
        assert obj(mu) <= obj(y) + 1e-12


def test_attention_weights_sum_to_one_and_mask():
    rng = np.random.default_rng(1)
    Q, Kset = mf.random_point(3, rng=rng, size=2), mf.random_point(3, rng=rng, size=4)
    mask = np.array([[True, True, False, True], [False, True, False, False]])
    w = attention_weights(Q, Kset, mask=mask).data
    np.testing.assert_allclose(w.sum(-1), 1.0)
    assert np.all(w[~mask] == 0)
    np.testing.assert_allclose(w[1, 1], 1.0)


def test_attention_logits_scaled_by_sqrt_dim():
    rng = np.random.default_rng(2)
    Q, Kset = mf.random_point(4, rng=rng, size=1), mf.random_point(4, rng=rng, size=3)
    d2 = mf.squared_distance(Q[:, None], Kset[None])
    expect = np.exp(-d2 / 2.0)
    np.testing.assert_allclose(attention_weights(Q, Kset).data, expect / expect.sum(-1, keepdims=True))


def test_attention_rejects_mismatched_values():
    x = mf.random_point(2, rng=np.random.default_rng(0), size=3)
    with pytest.raises(ValueError):
        lorentz_attention(x, x, x[:2])


def test_multi_head_attention_shapes_and_manifold():
    rng = np.random.default_rng(4)
    mha = MultiHeadAttention(5, heads=3, head_width=4, rng=rng, init_bound=0.5)
    x = mf.random_point(4, rng=rng, size=(2, 6))
    cat, weights = mha.concat_heads(x, x, x, return_weights=True)
    assert cat.shape == (2, 6, 12) and len(weights) == 3
    for h in range(3):
        assert on_manifold(cat.data[..., 4 * h:4 * (h + 1)])
    out = mha(x, x, x)
    assert out.shape == (2, 6, 5) and on_manifold(out)


# -- residual and positions -------------------------------------------------


def test_residual_on_manifold_and_length():
    rng = np.random.default_rng(5)
    res = LorentzResidual(5, 4, rng=rng, init_bound=0.5)
    o = rng.standard_normal((3, 5))
    x = mf.random_point(3, rng=rng, size=3)
    y = res(o, x)
    assert on_manifold(y)
    z = o @ res.v.data
    length = np.exp(res.log_scale.data) / (1 + np.exp(-z[:, 0]))
    np.testing.assert_allclose(np.linalg.norm(y.data[:, 1:], axis=-1), length, rtol=1e-12)


def test_residual_degenerate_passes_x_through():
    res = LorentzResidual(3, 3, rng=np.random.default_rng(0))
    res.weight.data[:] = 0.0
    x = np.zeros((1, 3))
    x[0, 0] = 1.0
    np.testing.assert_array_equal(res(np.ones((1, 3)), x).data, x)


def test_position_encoding_depends_on_position():
    rng = np.random.default_rng(6)
    pe = LorentzPositionEncoding(4, 3, rng=rng, init_std=1.0)
    word = np.tile(mf.random_point(2, rng=rng), (4, 1))
    out = pe(word).data
    assert on_manifold(out)
    assert np.max(np.abs(out[0] - out[1])) > 1e-6
    with pytest.raises(ValueError):
        pe(mf.random_point(2, rng=rng, size=5))


# -- modules and archives -----------------------------------------------------


def test_named_parameters_and_state_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    mha = MultiHeadAttention(4, heads=2, rng=rng)
    names = [n for n, _ in mha.named_parameters()]
    assert "q_proj.0.weight" in names and "out.log_scale" in names
    path = tmp_path / "m.npz"
    checkpoint.save(path, mha.state_dict(), {"kind": "mha"})
    state, header = checkpoint.load(path)
    assert header["meta"] == {"kind": "mha"} and header["scalar_bits"] == 64
    other = MultiHeadAttention(4, heads=2, rng=np.random.default_rng(8))
    other.load_state_dict(state)
    for (_, a), (_, b) in zip(mha.named_parameters(), other.named_parameters()):
        np.testing.assert_array_equal(a.data, b.data)


def test_checkpoint_rejects_mixed_widths_and_bad_files(tmp_path):
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.save(tmp_path / "x.npz", {"a": np.zeros(2, np.float32), "b": np.zeros(2)})
    np.savez(tmp_path / "plain.npz", a=np.zeros(2))
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.load(tmp_path / "plain.npz")


def test_load_state_dict_strict():
    layer = LorentzLinear(3, 3)
    with pytest.raises(KeyError):
        layer.load_state_dict({"weight": np.zeros((2, 3))})
    bad = layer.state_dict()
    bad["weight"] = np.zeros((3, 3))
    with pytest.raises(ValueError):
        layer.load_state_dict(bad)


def test_f32_layers_stay_f32():
    with ad.precision("f32"):
        layer = LorentzLinear(4, 4, rng=np.random.default_rng(0))
        y = layer(mf.random_point(3, rng=np.random.default_rng(1), size=2).astype(np.float32))
    assert y.dtype == np.float32
    assert on_manifold(y.data.astype(np.float64), tol=1e-5)
