import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vgaeplus import autodiff as ad
from vgaeplus.autodiff import ShapeError, Tensor, gradient_check


def _param(rng, shape, low=-1.0, high=1.0):
    return Tensor(rng.uniform(low, high, shape), requires_grad=True)


# Each entry builds a scalar loss from freshly drawn parameters.
def _unary(op, positive=False):
    def build(rng, r, c):
        x = _param(rng, (r, c), 0.2 if positive else -1.0, 2.0 if positive else 1.0)
        w = Tensor(rng.normal(size=(r, c)))
        return (lambda: ad.sum(ad.elementwise_mul(op(x), w))), [x]

    return build


def _binary(op, shape_b):
    def build(rng, r, c):
        a = _param(rng, (r, c))
        b = _param(rng, shape_b(r, c))
        w = Tensor(rng.normal(size=op(a, b).shape))
        return (lambda: ad.sum(ad.elementwise_mul(op(a, b), w))), [a, b]

    return build


OPS = {
    "matmul": _binary(ad.matmul, lambda r, c: (c, 3)),
    "add": _binary(ad.add, lambda r, c: (r, c)),
    "add_row": _binary(ad.add, lambda r, c: (1, c)),
    "add_scalar": _binary(ad.add, lambda r, c: (1, 1)),
    "sub": _binary(ad.sub, lambda r, c: (r, c)),
    "elementwise_mul": _binary(ad.elementwise_mul, lambda r, c: (r, c)),
    "mul_row": _binary(ad.elementwise_mul, lambda r, c: (1, c)),
    "sigmoid": _unary(ad.sigmoid),
    "log_sigmoid": _unary(ad.log_sigmoid),
    "softmax_rows": _unary(ad.softmax_rows),
    "log_softmax_rows": _unary(ad.log_softmax_rows),
    "relu": _unary(lambda t: ad.relu(ad.add(t, Tensor(0.05)))),
    "exp": _unary(ad.exp),
    "log": _unary(ad.log, positive=True),
    "neg": _unary(ad.neg),
    "scale": _unary(lambda t: ad.scale(t, -2.5)),
    "mean": _unary(lambda t: ad.mean(ad.elementwise_mul(t, t))),
    "transpose": _unary(lambda t: ad.transpose(ad.transpose(t))),
    "slice_rows": _unary(lambda t: ad.slice_rows(ad.add(t, Tensor(np.zeros(t.shape))), 0, t.shape[0])),
    "slice_cols": _unary(lambda t: ad.slice_cols(t, 0, t.shape[1])),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients_on_twenty_shapes(name):
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        r, c = rng.integers(1, 5, size=2)
        loss_fn, params = OPS[name](rng, int(r), int(c))
        worst = max(worst, gradient_check(loss_fn, params))
    assert worst < 1e-4


def test_gather_rows_gradient_with_repeats():
    rng = np.random.default_rng(0)
    x = _param(rng, (4, 3))
    w = Tensor(rng.normal(size=(5, 3)))
    idx = [0, 2, 2, 3, 0]
    assert gradient_check(lambda: ad.sum(ad.elementwise_mul(ad.gather_rows(x, idx), w)), [x]) < 1e-6


def test_partial_slices_route_gradients():
    rng = np.random.default_rng(1)
    x = _param(rng, (5, 4))
    loss = lambda: ad.add(ad.sum(ad.exp(ad.slice_rows(x, 1, 3))), ad.sum(ad.sigmoid(ad.slice_cols(x, 2, 4))))
    assert gradient_check(loss, [x]) < 1e-6


class TestForwardValues:
    def test_sigmoid_zero(self):
        assert ad.sigmoid(Tensor(0.0)).item() == 0.5

    def test_sigmoid_extremes_are_finite(self):
        v = ad.sigmoid(Tensor([[-800.0, 800.0]])).data
        np.testing.assert_array_equal(v, [[0.0, 1.0]])
        assert np.isfinite(ad.log_sigmoid(Tensor([[-800.0, 800.0]])).data).all()

    def test_softmax_equal_row(self):
        out = ad.softmax_rows(Tensor(np.full((2, 5), 3.7))).data
        np.testing.assert_allclose(out, 0.2, atol=0.0, rtol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
    def test_softmax_rows_sum_to_one(self, r, c, seed):
        x = np.random.default_rng(seed).normal(0, 10, (r, c))
        out = ad.softmax_rows(Tensor(x)).data
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(out >= 0.0) and np.all(out <= 1.0)

    def test_softmax_strictly_inside_unit_interval_for_moderate_logits(self):
        out = ad.softmax_rows(Tensor(np.random.default_rng(3).normal(0, 3, (10, 4)))).data
        assert np.all((out > 0.0) & (out < 1.0))


class TestBackwardMechanics:
    def test_finite_difference_of_sum_sigmoid_wx(self):
        rng = np.random.default_rng(7)
        w = _param(rng, (3, 4))
        x = Tensor(rng.normal(size=(4, 2)))
        assert gradient_check(lambda: ad.sum(ad.sigmoid(ad.matmul(w, x))), [w], epsilon=1e-5) < 1e-4

    def test_diamond_accumulates(self):
        x = Tensor([[1.5, -0.5]], requires_grad=True)
        shared = ad.sigmoid(x)
        loss = ad.sum(ad.add(ad.elementwise_mul(shared, shared), ad.scale(shared, 3.0)))
        loss.backward()
        s = 1.0 / (1.0 + np.exp(-x.data))
        np.testing.assert_allclose(x.grad, (2 * s + 3) * s * (1 - s), rtol=1e-12)
        x.zero_grad()
        rebuilt = lambda: ad.sum(ad.add(ad.elementwise_mul(ad.sigmoid(x), ad.sigmoid(x)), ad.scale(ad.sigmoid(x), 3.0)))
        assert gradient_check(rebuilt, [x]) < 1e-8

    def test_grad_present_iff_requires_grad(self):
        a = Tensor(np.ones((2, 2)))
        b = Tensor(np.ones((2, 2)), requires_grad=True)
        assert a.grad is None
        assert b.grad.shape == (2, 2)

    def test_shape_error_names_op_and_shapes(self):
        with pytest.raises(ShapeError, match=r"matmul.*\(2, 3\).*\(2, 3\)"):
            ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
        with pytest.raises(ShapeError, match="add"):
            ad.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))


class TestGradientCheck:
    def test_quadratic(self):
        x = Tensor([[1.0, 2.0]], requires_grad=True)
        loss = lambda: ad.scale(ad.sum(ad.elementwise_mul(x, x)), 0.5)
        loss().backward()
        np.testing.assert_allclose(x.grad, [[1.0, 2.0]])
        x.zero_grad()
        assert gradient_check(loss, [x]) < 1e-7

    def test_constant_loss(self):
        x = Tensor([[1.0, 2.0]], requires_grad=True)
        assert gradient_check(lambda: ad.add(ad.scale(ad.sum(x), 0.0), Tensor(4.0)), [x]) == 0.0

    def test_non_finite_loss_raises(self):
        x = Tensor([[-1.0]], requires_grad=True)
        with pytest.raises(FloatingPointError):
            with np.errstate(invalid="ignore", divide="ignore"):
                gradient_check(lambda: ad.log(x), [x])
