"""
Tests for the gradient tape, primitives and losses
"""
import numpy as np
import pytest

from src.errors import InvalidArgumentError, NumericError
from src.models import MlpSpec, RbfStudentSpec, build_mlp, build_rbf
from src.tensor import (GradTape, Tensor2, absolute, finite_diff_check, logcosh, loss_eval, loss_op, matmul,
                        mean_all, relu, row_sum, softplus, sqdist, square, sum_all, tanh)


def numeric_gradient(f, x, step=1e-6):
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        original = x[index]
        x[index] = original + step
        upper = f(x)
        x[index] = original - step
        lower = f(x)
        x[index] = original
        grad[index] = (upper - lower) / (2 * step)
    return grad


def test_flat_sequence_becomes_column():
    t = Tensor2([1.0, 2.0, 3.0])
    assert t.shape == (3, 1)


def test_non_finite_rejected():
    with pytest.raises(NumericError):
        Tensor2([[1.0, np.nan]])


def test_three_dimensional_rejected():
    with pytest.raises(InvalidArgumentError):
        Tensor2(np.zeros((2, 2, 2)))


def test_matmul_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        matmul(Tensor2(np.ones((2, 3))), Tensor2(np.ones((2, 3))))


@pytest.mark.parametrize("op", [tanh, relu, softplus, square, logcosh, absolute])
def test_elementwise_gradients(op, rng):
    x = rng.normal(size=(4, 3)) + 0.05  # keep relu/abs away from the kink
    tape = GradTape()
    leaf = tape.watch(x)
    grad = tape.gradient(sum_all(op(leaf)), leaf)
    expected = numeric_gradient(lambda v: op(Tensor2(v)).data.sum(), x.copy())
    np.testing.assert_allclose(grad, expected, rtol=1e-5, atol=1e-7)


def test_sqdist_gradient(rng):
    x = rng.normal(size=(3, 2))
    centers = rng.normal(size=(4, 2))
    tape = GradTape()
    x_leaf, c_leaf = tape.watch(x), tape.watch(centers)
    gx, gc = tape.gradient(sum_all(sqdist(x_leaf, c_leaf)), [x_leaf, c_leaf])
    np.testing.assert_allclose(gx, numeric_gradient(lambda v: sqdist(v, centers).data.sum(), x.copy()),
                               rtol=1e-6)
    np.testing.assert_allclose(gc, numeric_gradient(lambda v: sqdist(x, v).data.sum(), centers.copy()),
                               rtol=1e-6)


def test_broadcast_add_sums_back(rng):
    tape = GradTape()
    a = tape.watch(rng.normal(size=(5, 2)))
    b = tape.watch(np.zeros((1, 2)))
    grad = tape.gradient(sum_all(a + b), b)
    np.testing.assert_array_equal(grad, [[5.0, 5.0]])


def test_unregistered_value_rejected():
    tape = GradTape()
    leaf = tape.watch([[1.0]])
    loss = sum_all(square(leaf))
    with pytest.raises(InvalidArgumentError):
        tape.gradient(loss, Tensor2([[1.0]]))


def test_disconnected_value_gets_zero_gradient():
    tape = GradTape()
    used = tape.watch([[2.0]])
    unused = tape.watch([[3.0, 4.0]])
    grads = tape.gradient(sum_all(square(used)), [used, unused])
    assert grads[0][0, 0] == 4.0
    np.testing.assert_array_equal(grads[1], [[0.0, 0.0]])


def test_loss_must_be_scalar():
    tape = GradTape()
    leaf = tape.watch([[1.0, 2.0]])
    with pytest.raises(InvalidArgumentError):
        tape.gradient(square(leaf), leaf)


def test_row_sum_and_mean():
    x = Tensor2([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(row_sum(x).data, [[3.0], [7.0]])
    assert mean_all(x).item() == 2.5


def test_mse_value():
    assert loss_eval("mse", [[1.0], [2.0]], [[0.0], [0.0]]) == 2.5


def test_mse_of_three_four():
    assert loss_eval("mse", [[0.0], [0.0]], [[3.0], [4.0]]) == 12.5
    assert loss_eval("mse", [[1.0], [2.0]], [[1.0], [2.0]]) == 0.0


def test_logcosh_of_one():
    assert loss_eval("logcosh", [[1.0]], [[0.0]]) == pytest.approx(0.433781, abs=1e-6)


def test_logcosh_between_abs_and_abs_minus_log_two():
    errors = np.concatenate([-np.logspace(-6, 3, 40), [0.0], np.logspace(-6, 3, 40)]).reshape(-1, 1)
    values = logcosh(Tensor2(errors)).data
    assert np.all(values <= np.abs(errors) + 1e-12)
    assert np.all(values >= np.abs(errors) - np.log(2.0) - 1e-12)


def test_logcosh_small_and_large():
    assert loss_eval("logcosh", [[0.0]], [[0.0]]) == 0.0
    # log cosh(d) ~ |d| - log 2 far from zero, without overflow
    assert abs(loss_eval("logcosh", [[1000.0]], [[0.0]]) - (1000.0 - np.log(2.0))) < 1e-9


def test_loss_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        loss_op("mse", np.zeros((2, 1)), np.zeros((3, 1)))


def test_unknown_loss_kind():
    with pytest.raises(InvalidArgumentError):
        loss_eval("hinge", [[0.0]], [[0.0]])


def test_mlp_gradients_match_finite_differences(rng):
    for trial in range(10):
        d = int(rng.integers(1, 6))
        hidden = int(rng.integers(1, 12))
        model = build_mlp(MlpSpec(d, [hidden], "tanh"), seed=trial)
        assert finite_diff_check(model, rng.normal(size=(3, d))) <= 1e-5


def test_rbf_gradients_match_finite_differences(rng):
    model = build_rbf(RbfStudentSpec(2, 4), seed=3)
    assert finite_diff_check(model, rng.normal(size=(3, 2))) <= 1e-5
