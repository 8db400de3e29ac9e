import numpy as np
import numpy.testing as npt
import pytest

from app.engine.numcore import activation_grad, as_matrix, elementwise, finite_diff_gradient, matmul
from app.utils.errors import DimensionError, EvaluationError


def test_matmul_identity():
    npt.assert_array_equal(matmul(np.eye(2), np.array([[1.0, 2.0], [3.0, 4.0]])), [[1.0, 2.0], [3.0, 4.0]])


def test_matmul_row_by_column():
    npt.assert_array_equal(matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]])), [[11.0]])


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_as_matrix_rejects_vectors_and_nan():
    with pytest.raises(DimensionError):
        as_matrix([1.0, 2.0])
    with pytest.raises(ValueError):
        as_matrix([[np.nan]])


def test_elementwise_values():
    m = np.array([[-1.0, 0.0, 2.0]])
    npt.assert_array_equal(elementwise(m, "relu"), [[0.0, 0.0, 2.0]])
    npt.assert_allclose(elementwise(np.zeros((1, 1)), "sigmoid"), [[0.5]])
    npt.assert_allclose(elementwise(m, "tanh"), np.tanh(m))
    npt.assert_array_equal(elementwise(m, "identity"), m)


def test_elementwise_does_not_modify_input():
    m = np.array([[-1.0, 3.0]])
    elementwise(m, "relu")
    npt.assert_array_equal(m, [[-1.0, 3.0]])


def test_sigmoid_is_stable_for_large_inputs():
    out = elementwise(np.array([[-1000.0, 1000.0]]), "sigmoid")
    assert np.all(np.isfinite(out))
    npt.assert_allclose(out, [[0.0, 1.0]])


def test_unknown_activation():
    with pytest.raises(ValueError, match="unknown activation"):
        elementwise(np.zeros((1, 1)), "softplus")


@pytest.mark.parametrize("fn", ["sigmoid", "tanh", "identity"])
def test_activation_grad_matches_finite_differences(fn):
    pre = np.array([[-0.7, 0.1, 1.3]])
    eps = 1e-6
    numeric = (elementwise(pre + eps, fn) - elementwise(pre - eps, fn)) / (2 * eps)
    npt.assert_allclose(activation_grad(fn, pre, elementwise(pre, fn)), numeric, rtol=1e-6, atol=1e-9)


def test_finite_diff_of_sum_of_squares():
    grad = finite_diff_gradient(lambda p: float(np.sum(p ** 2)), np.array([1.0, -2.0]))
    npt.assert_allclose(grad, [2.0, -4.0], atol=1e-6)


def test_finite_diff_of_linear_function_is_exact():
    a = np.array([0.5, -1.5, 2.0])
    grad = finite_diff_gradient(lambda p: float(a @ p), np.zeros(3))
    npt.assert_allclose(grad, a, atol=1e-9)


def test_finite_diff_keeps_params_untouched():
    params = np.array([0.3, 0.4])
    finite_diff_gradient(lambda p: float(np.sum(p ** 3)), params)
    npt.assert_array_equal(params, [0.3, 0.4])


def test_finite_diff_rejects_bad_epsilon_and_nonfinite_loss():
    with pytest.raises(ValueError):
        finite_diff_gradient(lambda p: 0.0, np.zeros(1), epsilon=0.0)
    with pytest.raises(EvaluationError):
        finite_diff_gradient(lambda p: float("nan"), np.zeros(1))


def test_matmul_selects_second_column():
    npt.assert_array_equal(matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[0.0], [1.0]])), [[2.0], [4.0]])


def test_matmul_is_associative(rng):
    for _ in range(20):
        a, b, c = rng.normal(size=(3, 4)), rng.normal(size=(4, 2)), rng.normal(size=(2, 5))
        assert np.max(np.abs(matmul(matmul(a, b), c) - matmul(a, matmul(b, c)))) <= 1e-9


def test_bounded_activations(rng):
    m = rng.normal(scale=10.0, size=(20, 20))
    sig = elementwise(m, "sigmoid")
    assert np.all((sig >= 0.0) & (sig <= 1.0))
    assert np.all(np.abs(elementwise(m, "tanh")) <= 1.0)


def test_finite_diff_square_at_three():
    grad = finite_diff_gradient(lambda p: float(p[0] ** 2), np.array([3.0]), epsilon=1e-5)
    assert abs(grad[0] - 6.0) <= 1e-6


def test_finite_diff_constant_and_sum():
    npt.assert_array_equal(finite_diff_gradient(lambda p: 4.0, np.ones(3)), np.zeros(3))
    npt.assert_allclose(finite_diff_gradient(lambda p: float(np.sum(p)), np.ones(4)), np.ones(4), atol=1e-9)


def test_finite_diff_polynomial_relative_error():
    p0 = np.array([0.7, -1.2, 2.5])
    analytic = np.array([3 * 0.7 ** 2 - 2 * -1.2, -2 * 0.7, 4 * 2.5 ** 3])
    grad = finite_diff_gradient(lambda p: float(p[0] ** 3 - 2 * p[0] * p[1] + p[2] ** 4), p0)
    npt.assert_allclose(grad, analytic, rtol=1e-6)
