import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from advstyle_lab.core import Tensor, backward, no_grad
from advstyle_lab.core import ops
from advstyle_lab.errors import AutodiffError, DomainError, ShapeError


def test_add_constant_gradient_is_one():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    backward(ops.sum(x + 2))
    np.testing.assert_allclose(x.grad, np.ones(3), atol=1e-5)


def test_mul_gradient_is_other_operand():
    a = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    b = Tensor(np.array([3.0, -4.0]), requires_grad=True)
    backward(ops.sum(a * b))
    np.testing.assert_allclose(a.grad, [3.0, -4.0])
    np.testing.assert_allclose(b.grad, [1.0, 2.0])


def test_shared_subexpression_accumulates():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = x * x
    backward(ops.sum(y + y))
    np.testing.assert_allclose(x.grad, [8.0])


def test_backward_twice_accumulates():
    x = Tensor(np.array([1.0, 1.0]), requires_grad=True)
    backward(ops.sum(x * 3.0))
    backward(ops.sum(x * 3.0))
    np.testing.assert_allclose(x.grad, [6.0, 6.0])
    x.zero_grad()
    assert x.grad is None


def test_backward_is_linear_in_the_loss():
    data = np.array([0.5, -1.5, 2.0])

    def losses(x):
        h = x * x
        return ops.sum(h * x), ops.sum(ops.sqrt(h + 1.0)) * 2.0

    joint = Tensor(data, requires_grad=True)
    first, second = losses(joint)
    backward(first + second)

    separate = Tensor(data, requires_grad=True)
    first, second = losses(separate)
    backward(first)
    backward(second)
    np.testing.assert_allclose(joint.grad, separate.grad, rtol=1e-12)
    np.testing.assert_allclose(joint.grad, 3 * data**2 + 2 * data / np.sqrt(data**2 + 1), rtol=1e-12)


def test_leaf_outside_the_graph_keeps_no_gradient():
    x = Tensor(np.ones(2), requires_grad=True)
    unused = Tensor(np.ones(2), requires_grad=True)
    backward(ops.sum(x * 2.0))
    assert unused.grad is None
    np.testing.assert_allclose(x.grad, [2.0, 2.0])


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(AutodiffError):
        backward(x * 2.0)


def test_backward_rejects_empty_tape():
    with pytest.raises(AutodiffError):
        backward(Tensor(np.array(1.0)))


def test_no_grad_records_nothing():
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = ops.sum(x * 2.0)
    assert y.record is None
    assert not y.requires_grad


def test_item_needs_single_element():
    assert Tensor(np.array([4.5])).item() == 4.5
    with pytest.raises(ValueError):
        Tensor(np.ones(2)).item()


def test_integer_input_promoted_and_float32_kept():
    assert Tensor([1, 2]).dtype == np.float64
    assert Tensor(np.ones(2, dtype=np.float32)).dtype == np.float32
    assert (Tensor(np.ones(2, dtype=np.float32)) * 2.0).dtype == np.float32


@pytest.mark.parametrize(
    "left, right",
    [((2, 3), (3, 2)), ((2, 3), (2,)), ((2, 3, 4, 4), (3, 4)), ((2, 3, 4, 4), (2, 3, 2, 1))],
)
def test_unsupported_broadcast_raises(left, right):
    with pytest.raises(ShapeError):
        ops.add(Tensor(np.ones(left)), Tensor(np.ones(right)))


@pytest.mark.parametrize(
    "big, small",
    [((2, 3), ()), ((2, 3), (1, 1)), ((4, 3), (3,)), ((2, 3, 4, 4), (2, 3, 1, 1)), ((2, 3, 4, 4), (1, 3, 1, 1))],
)
def test_supported_broadcast_gradient_shape(big, small):
    a = Tensor(np.ones(big), requires_grad=True)
    b = Tensor(np.full(small, 2.0), requires_grad=True)
    out = a * b
    assert out.shape == big
    backward(ops.sum(out))
    assert b.grad.shape == small
    np.testing.assert_allclose(b.grad, np.full(small, np.prod(big) / max(np.prod(small), 1)))


def test_div_by_exact_zero_raises():
    with pytest.raises(DomainError):
        ops.div(Tensor(np.ones(2)), Tensor(np.array([1.0, 0.0])))


def test_sqrt_negative_raises_and_zero_has_finite_gradient():
    with pytest.raises(DomainError):
        ops.sqrt(Tensor(np.array([-1e-3])))
    x = Tensor(np.array([0.0, 4.0]), requires_grad=True)
    backward(ops.sum(ops.sqrt(x)))
    np.testing.assert_allclose(x.grad, [0.0, 0.25])


def test_var_of_constant_channel_gives_zero_gradient():
    x = Tensor(np.full((1, 1, 3, 3), 0.7), requires_grad=True)
    sigma = ops.sqrt(ops.var(x, axis=(2, 3)))
    backward(ops.sum(sigma))
    assert np.all(np.isfinite(x.grad))
    np.testing.assert_array_equal(x.grad, np.zeros_like(x.data))


def test_relu_derivative_at_zero_is_zero():
    x = Tensor(np.array([-1.0, 0.0, 2.0]), requires_grad=True)
    backward(ops.sum(ops.relu(x)))
    np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0])


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_conv2d_matches_direct_sum():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((1, 2, 4, 4))
    w = rng.standard_normal((3, 2, 3, 3))
    out = ops.conv2d(Tensor(x), Tensor(w)).data
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    expected = np.zeros((1, 3, 4, 4))
    for o in range(3):
        for i in range(4):
            for j in range(4):
                expected[0, o, i, j] = (padded[0, :, i:i + 3, j:j + 3] * w[o]).sum()
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_conv2d_rejects_channel_mismatch():
    with pytest.raises(ShapeError):
        ops.conv2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((3, 1, 3, 3))))


def test_maxpool_drops_remainder_and_underflows():
    x = Tensor(np.arange(25.0).reshape(1, 1, 5, 5))
    out = ops.maxpool2d(x, 2)
    np.testing.assert_array_equal(out.data[0, 0], [[6.0, 8.0], [16.0, 18.0]])
    with pytest.raises(ShapeError, match="underflow"):
        ops.maxpool2d(Tensor(np.ones((1, 1, 1, 4))), 2)


def test_maxpool_gradient_routes_to_argmax():
    x = Tensor(np.array([[[[1.0, 5.0], [2.0, 3.0]]]]), requires_grad=True)
    backward(ops.sum(ops.maxpool2d(x, 2)))
    np.testing.assert_array_equal(x.grad[0, 0], [[0.0, 1.0], [0.0, 0.0]])


def test_cross_entropy_uniform_logits():
    logits = Tensor(np.zeros((4, 7)))
    loss = ops.softmax_cross_entropy(logits, np.array([0, 1, 2, 6]))
    assert loss.item() == pytest.approx(np.log(7))


def test_cross_entropy_rejects_bad_labels():
    logits = Tensor(np.zeros((2, 3)))
    with pytest.raises(DomainError):
        ops.softmax_cross_entropy(logits, np.array([0, 3]))
    with pytest.raises(ShapeError):
        ops.softmax_cross_entropy(logits, np.array([0, 1, 2]))


def test_grl_reverses_and_scales():
    v = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    out = ops.grl(v, 2.5)
    np.testing.assert_array_equal(out.data, v.data)
    backward(ops.sum(out * 3.0))
    np.testing.assert_allclose(v.grad, [-7.5, -7.5])
    with pytest.raises(DomainError):
        ops.grl(v, -0.1)


def test_index_select_accumulates_repeats():
    x = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
    picked = ops.index_select(x, np.array([2, 2, 0]))
    np.testing.assert_array_equal(picked.data, [[4.0, 5.0], [4.0, 5.0], [0.0, 1.0]])
    backward(ops.sum(picked))
    np.testing.assert_array_equal(x.grad, [[1.0, 1.0], [0.0, 0.0], [2.0, 2.0]])
    with pytest.raises(ShapeError):
        ops.index_select(x, np.array([3]))


def test_reduction_axis_out_of_range():
    with pytest.raises(ShapeError):
        ops.mean(Tensor(np.ones((2, 3))), axis=2)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-10, 10)))
def test_mean_gradient_is_uniform(values):
    x = Tensor(values, requires_grad=True)
    backward(ops.mean(x))
    np.testing.assert_allclose(x.grad, np.full((3, 4), 1.0 / 12))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (2, 5), elements=st.floats(-5, 5)))
def test_norm_matches_numpy(values):
    assert ops.norm(Tensor(values)).item() == pytest.approx(np.linalg.norm(values), abs=1e-12)
