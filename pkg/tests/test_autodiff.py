import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hybolib import autodiff as ad
from hybolib.autodiff import DomainError, ShapeError, Tensor


def leaf(x):
    return Tensor(np.asarray(x, dtype=float), requires_grad=True)


def test_square_value_and_grad():
    x = leaf(3.0)
    y = ad.square(x)
    assert y.item() == 9.0
    y.backward()
    assert x.grad == pytest.approx(6.0)


def test_arcosh_derivative_oracle():
    x = leaf(2.0)
    ad.arcosh(x).backward()
    assert x.grad == pytest.approx(1 / math.sqrt(3), rel=1e-14)


def test_arcosh_below_one_raises():
    with pytest.raises(DomainError):
        ad.arcosh(Tensor(0.5))


def test_sqrt_negative_raises():
    with pytest.raises(DomainError):
        ad.sqrt(Tensor(-1.0))


def test_shape_mismatch_is_error():
    with pytest.raises(ShapeError):
        ad.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))


def test_scalar_broadcast_allowed():
    a = leaf(np.ones((2, 3)))
    s = leaf(2.0)
    ad.sum(a * s).backward()
    assert s.grad == pytest.approx(6.0)
    np.testing.assert_allclose(a.grad, 2.0)


def test_backward_requires_scalar_root():
    a = leaf(np.ones(3))
    with pytest.raises(ValueError):
        (a * 2.0).backward()


def test_gradient_accumulates_over_reuse():
    x = leaf(1.5)
    y = x * x + x
    y.backward()
    assert x.grad == pytest.approx(2 * 1.5 + 1)


def test_no_grad_records_nothing():
    x = leaf(np.ones(2))
    with ad.no_grad():
        y = ad.exp(x)
    assert y.node is None and not y.requires_grad


def test_grad_zero_for_unused_leaf():
    x, y = leaf(1.0), leaf(2.0)
    gx, gy = ad.grad(ad.square(x), [x, y])
    assert gx == pytest.approx(2.0)
    assert np.all(gy == 0)


def test_index_repeats_accumulate():
    E = leaf(np.arange(6.0).reshape(3, 2))
    rows = E[np.array([0, 0, 2])]
    ad.sum(rows).backward()
    np.testing.assert_allclose(E.grad, [[2, 2], [0, 0], [1, 1]])


def test_matmul_batched_against_numpy():
    rng = np.random.default_rng(0)
    A, B = leaf(rng.standard_normal((4, 2, 3))), leaf(rng.standard_normal((4, 3, 5)))
    out = A @ B
    np.testing.assert_allclose(out.data, np.matmul(A.data, B.data))
    rep = ad.finite_difference_check(lambda a, b: ad.sum(ad.square(a @ b)), [A, B])
    assert rep.passed, rep.failures[:3]


def test_log_softmax_stable_for_large_logits():
    z = Tensor(np.array([1000.0, 0.0, -1000.0]))
    np.testing.assert_allclose(ad.log_softmax(z).data, [0.0, -1000.0, -2000.0], atol=1e-12)


def test_sigmoid_extremes_finite():
    z = Tensor(np.array([-800.0, 800.0]))
    assert np.all(np.isfinite(ad.log_sigmoid(z).data))
    np.testing.assert_allclose(ad.sigmoid(z).data, [0.0, 1.0])


def test_dropout_mask_replay_and_scaling():
    x = leaf(np.ones((2, 4)))
    mask = np.array([[1, 0, 1, 0], [0, 0, 1, 1]], dtype=float)
    y = ad.dropout(x, 0.5, mask=mask)
    np.testing.assert_allclose(y.data, mask * 2.0)
    ad.sum(y).backward()
    np.testing.assert_allclose(x.grad, mask * 2.0)


def test_dropout_is_identity_in_eval():
    x = Tensor(np.ones(5))
    assert np.all(ad.dropout(x, 0.5, training=False).data == 1.0)


def test_precision_context_switches_default_dtype():
    with ad.precision("f32"):
        assert Tensor([1.0, 2.0]).dtype == np.float32
    assert Tensor([1.0]).dtype == np.float64


def test_gradcheck_rejects_bad_step():
    with pytest.raises(ValueError):
        ad.finite_difference_check(lambda x: ad.sum(x), [leaf(np.ones(2))], h=0.1)


def test_gradcheck_flags_wrong_gradient():
    # a deliberately broken primitive: value of x**2 with gradient 3x
    def broken(x):
        return ad.ops._make("broken", x.data ** 2, (x,), lambda g: (3 * x.data * g,))

    rep = ad.finite_difference_check(lambda x: ad.sum(broken(x)), [leaf(np.array([1.0, 2.0]))])
    assert not rep.passed
    assert rep.max_rel_err > 0.1


ELEMENTWISE = {
    "exp": (ad.exp, -3, 3),
    "log": (ad.log, 0.1, 5),
    "sqrt": (ad.sqrt, 0.1, 5),
    "cosh": (ad.cosh, -3, 3),
    "sinh": (ad.sinh, -3, 3),
    "arcosh": (ad.arcosh, 1.1, 6),
    "sigmoid": (ad.sigmoid, -6, 6),
    "log_sigmoid": (ad.log_sigmoid, -6, 6),
    "square": (ad.square, -3, 3),
}


@pytest.mark.parametrize("name", sorted(ELEMENTWISE))
def test_elementwise_gradients(name):
    fn, lo, hi = ELEMENTWISE[name]
    x = leaf(np.random.default_rng(1).uniform(lo, hi, size=7))
    rep = ad.finite_difference_check(lambda t: ad.sum(fn(t)), [x])
    assert rep.passed, rep.failures[:3]


def test_softmax_and_norm_gradients():
    rng = np.random.default_rng(2)
    x = leaf(rng.standard_normal((3, 4)))
    w = Tensor(rng.standard_normal((3, 4)))
    assert ad.finite_difference_check(lambda t: ad.sum(ad.softmax(t) * w), [x]).passed
    assert ad.finite_difference_check(lambda t: ad.sum(ad.log_softmax(t) * w), [x]).passed
    assert ad.finite_difference_check(lambda t: ad.sum(ad.norm2(t)), [x]).passed


def test_norm2_zero_vector_has_zero_gradient():
    x = leaf(np.zeros(3))
    ad.norm2(x).backward()
    assert np.all(x.grad == 0)


def test_structural_ops_gradients():
    rng = np.random.default_rng(3)
    a = leaf(rng.standard_normal((2, 3)))
    b = leaf(rng.standard_normal((2, 2)))
    w = Tensor(rng.standard_normal((2, 5)))
    assert ad.finite_difference_check(lambda x, y: ad.sum(ad.concat([x, y]) * w), [a, b]).passed
    v = leaf(rng.standard_normal((1, 3)))
    w2 = Tensor(rng.standard_normal((4, 3)))
    assert ad.finite_difference_check(lambda x: ad.sum(ad.expand(x, (4, 3)) * w2), [v]).passed
    assert ad.finite_difference_check(lambda x: ad.sum(ad.transpose(x) @ x), [a]).passed
    mask = np.array([[True, False, True], [False, True, False]])
    assert ad.finite_difference_check(lambda x: ad.sum(ad.square(ad.where(mask, x, 0.5))), [a]).passed


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 2), elements=st.floats(-5, 5)),
       arrays(np.float64, (3, 2), elements=st.floats(-5, 5)))
def test_linearity_of_backward(x, y):
    a, b = leaf(x), leaf(y)
    ad.sum(2.0 * a + 3.0 * b).backward()
    np.testing.assert_array_equal(a.grad, np.full_like(x, 2.0))
    np.testing.assert_array_equal(b.grad, np.full_like(y, 3.0))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 5, elements=st.floats(-20, 20)))
def test_softmax_sums_to_one(z):
    np.testing.assert_allclose(ad.softmax(Tensor(z)).data.sum(), 1.0, rtol=1e-12)
