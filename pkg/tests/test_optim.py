import numpy as np
import pytest

from vgaeplus import autodiff as ad
from vgaeplus.autodiff import Tensor
from vgaeplus.optim import AdamState, adam_step


def test_defaults():
    s = AdamState()
    assert (s.learning_rate, s.beta1, s.beta2, s.eps) == (1e-2, 0.9, 0.999, 1e-8)


def test_zero_gradient_leaves_parameters():
    p = Tensor([[1.0, -2.0]], requires_grad=True)
    adam_step(AdamState(), [p])
    np.testing.assert_array_equal(p.data, [[1.0, -2.0]])


def test_constant_positive_gradient_decreases_monotonically():
    p = Tensor([[0.0]], requires_grad=True)
    state = AdamState()
    prev = p.item()
    for _ in range(50):
        p.grad[...] = 3.0
        adam_step(state, [p])
        assert p.item() < prev
        prev = p.item()
    assert state.step == 50


def test_first_step_moves_by_learning_rate():
    # bias correction makes the first update exactly lr * sign(g) up to eps
    p = Tensor([[1.0]], requires_grad=True)
    p.grad[...] = 0.37
    adam_step(AdamState(learning_rate=0.1), [p])
    assert p.item() == pytest.approx(0.9, abs=1e-7)


def test_converges_on_shifted_quadratic():
    x = Tensor([[0.0]], requires_grad=True)
    state = AdamState(learning_rate=0.1)
    for _ in range(200):
        d = ad.sub(x, Tensor(3.0))
        ad.sum(ad.elementwise_mul(d, d)).backward()
        adam_step(state, [x])
    assert abs(x.item() - 3.0) < 0.05


def test_gradients_zeroed_and_moments_shaped():
    p = Tensor(np.ones((2, 3)), requires_grad=True)
    p.grad[...] = 1.0
    state = AdamState()
    adam_step(state, [p])
    assert not p.grad.any()
    assert state.first_moment[0].shape == (2, 3)


def test_missing_gradient_raises():
    with pytest.raises(ValueError, match="no gradient"):
        adam_step(AdamState(), [Tensor([[1.0]])])
