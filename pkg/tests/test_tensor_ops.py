import numpy as np
import pytest

from ultrasim.tensor import (
    GraphError,
    NonFiniteError,
    RunningStats,
    ShapeError,
    Tensor,
    backward,
    batchnorm2d,
    conv2d_forward,
    conv_transpose2d_forward,
    linear_forward,
    mse_loss,
    no_grad,
    relu,
    reshape,
)

from reference_ops import conv2d_reference, conv_transpose2d_reference


def t64(arr, requires_grad=False):
    return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=requires_grad)


class TestLinear:
    def test_identity_weight(self):
        x = Tensor([[1.0, 2.0]])
        w = Tensor([[1.0, 0.0], [0.0, 1.0]])
        b = Tensor([0.0, 0.0])
        y = linear_forward(x, w, b)
        assert np.allclose(y.data, [[1.0, 2.0]])

    def test_zero_input_passes_bias(self):
        x = Tensor([[0.0, 0.0]])
        w = Tensor([[5.0, -2.0], [1.0, 9.0]])
        b = Tensor([3.0, 4.0])
        y = linear_forward(x, w, b)
        assert np.allclose(y.data, [[3.0, 4.0]])

    def test_hand_dot_product(self):
        # [1,1] . [2,3] + 1 = 6
        y = linear_forward(Tensor([[1.0, 1.0]]), Tensor([[2.0, 3.0]]), Tensor([1.0]))
        assert np.allclose(y.data, [[6.0]])

    def test_shape_mismatch_raises(self):
        with pytest.raises(ShapeError):
            linear_forward(Tensor([[1.0, 2.0, 3.0]]), Tensor([[1.0, 2.0]]), Tensor([0.0]))


class TestConv2d:
    def test_zero_input_zero_output(self):
        x = Tensor(np.zeros((2, 3, 5, 5), dtype=np.float32))
        w = Tensor(np.random.default_rng(0).normal(size=(4, 3, 3, 3)).astype(np.float32))
        y = conv2d_forward(x, w, stride=1, pad=1)
        assert np.all(y.data == 0.0)

    def test_matches_six_loop_reference(self):
        x = np.ones((1, 1, 4, 4), dtype=np.float64)
        w = np.ones((1, 1, 4, 4), dtype=np.float64)
        y = conv2d_forward(t64(x), t64(w), stride=2, pad=1)
        ref = conv2d_reference(x, w, stride=2, pad=1)
        assert y.shape == (1, 1, 2, 2)
        assert np.allclose(y.data, ref)

    def test_matches_reference_random(self):
        rng = np.random.default_rng(3)
        for stride, pad in [(1, 0), (1, 1), (2, 1), (2, 0)]:
            x = rng.normal(size=(2, 3, 6, 5))
            w = rng.normal(size=(4, 3, 3, 3))
            b = rng.normal(size=4)
            y = conv2d_forward(t64(x), t64(w), t64(b), stride=stride, pad=pad)
            ref = conv2d_reference(x, w, b, stride=stride, pad=pad)
            assert np.allclose(y.data, ref, atol=1e-10)

    def test_one_by_one_identity_kernel(self):
        x = np.random.default_rng(1).normal(size=(1, 1, 6, 6))
        w = np.ones((1, 1, 1, 1))
        y = conv2d_forward(t64(x), t64(w), stride=1, pad=0)
        assert np.allclose(y.data, x)

    def test_halves_even_spatial_dims(self):
        x = Tensor(np.zeros((1, 2, 16, 16), dtype=np.float32))
        w = Tensor(np.zeros((3, 2, 4, 4), dtype=np.float32))
        assert conv2d_forward(x, w, stride=2, pad=1).shape == (1, 3, 8, 8)

    def test_linearity(self):
        rng = np.random.default_rng(5)
        x1 = rng.normal(size=(1, 2, 8, 8)).astype(np.float32)
        x2 = rng.normal(size=(1, 2, 8, 8)).astype(np.float32)
        w = Tensor(rng.normal(size=(3, 2, 4, 4)).astype(np.float32))
        a, b = 0.7, -1.3
        lhs = conv2d_forward(Tensor(a * x1 + b * x2), w, stride=2, pad=1).data
        rhs = a * conv2d_forward(Tensor(x1), w, stride=2, pad=1).data + \
            b * conv2d_forward(Tensor(x2), w, stride=2, pad=1).data
        assert np.allclose(lhs, rhs, atol=1e-5)

    def test_invalid_geometry_raises(self):
        with pytest.raises(ShapeError):
            conv2d_forward(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 4, 4))), stride=1, pad=0)


class TestConvTranspose2d:
    def test_zeros_double(self):
        x = Tensor(np.zeros((1, 1, 2, 2), dtype=np.float32))
        w = Tensor(np.zeros((1, 1, 4, 4), dtype=np.float32))
        y = conv_transpose2d_forward(x, w, stride=2, pad=1)
        assert y.shape == (1, 1, 4, 4)
        assert np.all(y.data == 0.0)

    def test_matches_scatter_add_reference(self):
        x = np.ones((1, 1, 2, 2), dtype=np.float64)
        w = np.ones((1, 1, 4, 4), dtype=np.float64)
        y = conv_transpose2d_forward(t64(x), t64(w), stride=2, pad=1)
        ref = conv_transpose2d_reference(x, w, stride=2, pad=1)
        assert y.shape == (1, 1, 4, 4)
        assert np.allclose(y.data, ref)

    def test_matches_reference_random(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(2, 3, 3, 4))
        w = rng.normal(size=(3, 2, 4, 4))
        b = rng.normal(size=2)
        y = conv_transpose2d_forward(t64(x), t64(w), t64(b), stride=2, pad=1)
        ref = conv_transpose2d_reference(x, w, b, stride=2, pad=1)
        assert np.allclose(y.data, ref, atol=1e-10)

    def test_doubles_spatial_dims(self):
        for c_in, c_out in [(1, 1), (8, 3)]:
            x = Tensor(np.zeros((2, c_in, 4, 4), dtype=np.float32))
            w = Tensor(np.zeros((c_in, c_out, 4, 4), dtype=np.float32))
            assert conv_transpose2d_forward(x, w, stride=2, pad=1).shape == (2, c_out, 8, 8)

    def test_empty_output_raises(self):
        x = Tensor(np.zeros((1, 1, 1, 1)))
        w = Tensor(np.zeros((1, 1, 2, 2)))
        with pytest.raises(ShapeError):
            conv_transpose2d_forward(x, w, stride=1, pad=2)


class TestRelu:
    def test_basic(self):
        y = relu(Tensor([-1.0, 0.0, 2.0]))
        assert np.allclose(y.data, [0.0, 0.0, 2.0])

    def test_all_negative(self):
        y = relu(Tensor(-np.ones((3, 4))))
        assert np.all(y.data == 0.0)

    def test_identity_on_positive(self):
        x = np.abs(np.random.default_rng(0).normal(size=(5, 5))) + 0.1
        assert np.array_equal(relu(Tensor(x)).data, x)


class TestMse:
    def test_equal_is_zero(self):
        a = Tensor(np.random.default_rng(0).normal(size=(4, 4)).astype(np.float32))
        assert mse_loss(a, Tensor(a.data.copy())).item() == 0.0

    def test_zeros_vs_ones(self):
        assert mse_loss(Tensor(np.zeros(10)), Tensor(np.ones(10))).item() == 1.0

    def test_half(self):
        assert mse_loss(Tensor([0.0, 0.5]), Tensor([1.0, 0.5])).item() == pytest.approx(0.5)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mse_loss(Tensor(np.zeros(3)), Tensor(np.zeros(4)))

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteError):
            mse_loss(Tensor([np.nan]), Tensor([0.0]))


class TestBackward:
    def test_scalar_square_gradient(self):
        # loss = mse(x, 0) with x = 3 gives dloss/dx = 2*3 = 6
        x = Tensor([3.0], requires_grad=True)
        loss = mse_loss(x, Tensor([0.0]))
        backward(loss)
        assert np.allclose(x.grad, [6.0])

    def test_unreached_parameter_has_no_grad(self):
        x = Tensor([3.0], requires_grad=True)
        p = Tensor([1.0], requires_grad=True)
        backward(mse_loss(x, Tensor([0.0])))
        assert p.grad is None

    def test_double_backward_raises(self):
        x = Tensor([3.0], requires_grad=True)
        loss = mse_loss(x, Tensor([0.0]))
        backward(loss)
        with pytest.raises(GraphError):
            backward(loss)

    def test_non_scalar_root_raises(self):
        x = Tensor(np.ones(3), requires_grad=True)
        y = relu(x)
        with pytest.raises(GraphError):
            backward(y)

    def test_unrecorded_root_raises(self):
        with pytest.raises(GraphError):
            backward(Tensor([1.0]))

    def test_grad_accumulates_across_uses(self):
        x = Tensor([2.0], requires_grad=True)
        y = x + x  # dy/dx = 2
        loss = mse_loss(y, Tensor([0.0]))  # d/dy mse = 2y/1 = 8, dx = 16
        backward(loss)
        assert np.allclose(x.grad, [16.0])

    def test_no_grad_blocks_recording(self):
        x = Tensor([3.0], requires_grad=True)
        with no_grad():
            loss = mse_loss(x, Tensor([0.0]))
        assert loss._parents == ()


class TestBatchNorm:
    def test_train_normalizes(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.normal(loc=3.0, scale=2.0, size=(8, 4, 6, 6)).astype(np.float32))
        gamma = Tensor(np.ones(4, dtype=np.float32))
        beta = Tensor(np.zeros(4, dtype=np.float32))
        y = batchnorm2d(x, gamma, beta, RunningStats(4), training=True)
        got_mean = y.data.mean(axis=(0, 2, 3))
        got_var = y.data.var(axis=(0, 2, 3))
        assert np.allclose(got_mean, 0.0, atol=1e-5)
        assert np.allclose(got_var, 1.0, atol=1e-3)

    def test_zero_gamma_constant_beta(self):
        x = Tensor(np.random.default_rng(1).normal(size=(4, 2, 3, 3)).astype(np.float32))
        y = batchnorm2d(x, Tensor(np.zeros(2)), Tensor(np.full(2, 7.0)), RunningStats(2), training=True)
        assert np.allclose(y.data, 7.0)

    def test_eval_with_unit_stats_closed_form(self):
        eps = 1e-5
        x = np.random.default_rng(2).normal(size=(2, 3, 4, 4)).astype(np.float64)
        y = batchnorm2d(t64(x), t64(np.ones(3)), t64(np.zeros(3)), RunningStats(3, dtype=np.float64),
                        training=False, eps=eps)
        assert np.allclose(y.data, x / np.sqrt(1.0 + eps), atol=1e-12)

    def test_running_stats_updated_with_momentum(self):
        x = np.random.default_rng(3).normal(loc=5.0, size=(16, 2, 8, 8)).astype(np.float32)
        stats = RunningStats(2)
        batchnorm2d(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), stats, training=True, momentum=0.1)
        mu = x.mean(axis=(0, 2, 3))
        m = x.shape[0] * x.shape[2] * x.shape[3]
        var_unbiased = x.var(axis=(0, 2, 3)) * m / (m - 1)
        assert np.allclose(stats.mean, 0.1 * mu, atol=1e-5)
        assert np.allclose(stats.var, 0.9 * 1.0 + 0.1 * var_unbiased, atol=1e-4)

    def test_single_element_train_raises(self):
        x = Tensor(np.zeros((1, 3, 1, 1)))
        with pytest.raises(ShapeError):
            batchnorm2d(x, Tensor(np.ones(3)), Tensor(np.zeros(3)), RunningStats(3), training=True)


class TestReshape:
    def test_roundtrip_with_grad(self):
        x = Tensor(np.arange(12, dtype=np.float32).reshape(3, 4), requires_grad=True)
        y = reshape(x, (2, 6))
        loss = mse_loss(y, Tensor(np.zeros((2, 6), dtype=np.float32)))
        backward(loss)
        assert x.grad.shape == (3, 4)
        assert np.allclose(x.grad, 2.0 * x.data / 12)
