import numpy as np
import pytest

from ultrasim.tensor import Adam, AdamState, NonFiniteError, Tensor, adam_step, backward, mse_loss


def test_zero_grad_leaves_params_unchanged():
    p = Tensor(np.array([1.5, -2.0], dtype=np.float32), requires_grad=True)
    state = AdamState.for_params([p])
    adam_step([p], [np.zeros(2, dtype=np.float32)], state)
    assert np.allclose(p.data, [1.5, -2.0])
    assert state.t == 1


def test_none_grad_skipped():
    p = Tensor(np.array([1.0], dtype=np.float32), requires_grad=True)
    state = AdamState.for_params([p])
    adam_step([p], [None], state)
    assert np.allclose(p.data, [1.0])


def test_first_step_closed_form():
    # param 1.0, grad 2.0, lr 2e-4: update = lr * 2 / (2 + eps)
    p = Tensor(np.array([1.0], dtype=np.float64), requires_grad=True)
    state = AdamState.for_params([p], lr=0.0002)
    adam_step([p], [np.array([2.0])], state)
    expected = 1.0 - 0.0002 * (2.0 / (2.0 + 1e-8))
    assert p.data[0] == pytest.approx(expected, abs=1e-12)
    assert p.data[0] == pytest.approx(0.9998, abs=1e-7)


def test_quadratic_loss_decreases():
    p = Tensor(np.array([3.0], dtype=np.float32), requires_grad=True)
    opt = Adam([p], lr=0.05)
    losses = []
    for _ in range(3):
        opt.zero_grad()
        loss = mse_loss(p, Tensor([0.0]))
        backward(loss)
        losses.append(loss.item())
        opt.step()
    losses.append(mse_loss(p, Tensor([0.0])).item())
    assert losses[1] < losses[0]
    assert losses[2] < losses[1]
    assert losses[3] < losses[2]


def test_non_finite_gradient_rejected():
    p = Tensor(np.array([1.0], dtype=np.float32), requires_grad=True)
    state = AdamState.for_params([p])
    with pytest.raises(NonFiniteError):
        adam_step([p], [np.array([np.inf], dtype=np.float32)], state)


def test_moment_shapes_match_params():
    p1 = Tensor(np.zeros((3, 4), dtype=np.float32), requires_grad=True)
    p2 = Tensor(np.zeros(7, dtype=np.float32), requires_grad=True)
    state = AdamState.for_params([p1, p2])
    assert state.m[0].shape == (3, 4) and state.v[1].shape == (7,)
    g1 = np.ones((3, 4), dtype=np.float32)
    g2 = np.ones(7, dtype=np.float32)
    adam_step([p1, p2], [g1, g2], state)
    adam_step([p1, p2], [g1, g2], state)
    assert state.t == 2
    assert np.all(state.v[0] >= 0.0)


def test_state_mismatch_detected():
    p = Tensor(np.zeros(2), requires_grad=True)
    q = Tensor(np.zeros(2), requires_grad=True)
    state = AdamState.for_params([p])
    with pytest.raises(ValueError):
        adam_step([p, q], [None, None], state)
