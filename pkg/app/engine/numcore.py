"""Aritmética densa de matrices float64 y oráculo de gradientes.

Una ``Matrix`` es un ``numpy.ndarray`` bidimensional de float64. Las funciones
son puras: nunca modifican sus argumentos.
"""
import logging
from typing import Callable, Dict, NamedTuple

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from app.utils.errors import DimensionError, EvaluationError

logger = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]


def as_matrix(values, name: str = "matrix") -> Matrix:
    """
    Convierte ``values`` en una matriz float64 2-D finita.

    Args:
        values: Cualquier secuencia anidada o arreglo convertible.
        name (str): Nombre usado en los mensajes de error.

    Returns:
        Matrix: Copia float64 de los valores.

    Raises:
        DimensionError: Si el arreglo no es bidimensional.
        ValueError: Si contiene NaN o infinitos.
    """
    matrix = np.array(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{name} contains non-finite entries")
    return matrix


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """
    Producto matricial estándar.

    Raises:
        DimensionError: Si a.cols != b.rows; el mensaje nombra ambas formas.
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


class Activation(NamedTuple):
    """Función de activación y su derivada expresada con (pre, out)."""
    forward: Callable[[Matrix], Matrix]
    derivative: Callable[[Matrix, Matrix], Matrix]


ACTIVATIONS: Dict[str, Activation] = {
    "sigmoid": Activation(expit, lambda pre, out: out * (1.0 - out)),
    "tanh": Activation(np.tanh, lambda pre, out: 1.0 - out * out),
    "relu": Activation(lambda m: np.maximum(m, 0.0), lambda pre, out: (pre > 0.0).astype(np.float64)),
    "identity": Activation(lambda m: m.copy(), lambda pre, out: np.ones_like(pre)),
}


def _activation(fn: str) -> Activation:
    try:
        return ACTIVATIONS[fn]
    except KeyError as e:
        raise ValueError(f"unknown activation '{fn}'; expected one of {sorted(ACTIVATIONS)}") from e


def elementwise(m: Matrix, fn: str) -> Matrix:
    """
    Aplica la activación ``fn`` entrada a entrada.

    Args:
        m (Matrix): Matriz finita.
        fn (str): "sigmoid", "tanh", "relu" o "identity".

    Returns:
        Matrix: Nueva matriz con la activación aplicada.
    """
    if not np.all(np.isfinite(m)):
        raise ValueError("elementwise input contains non-finite entries")
    return _activation(fn).forward(m)


def activation_grad(fn: str, pre: Matrix, out: Matrix) -> Matrix:
    """Derivada de ``fn`` evaluada en la preactivación ``pre`` (con salida ``out``)."""
    return _activation(fn).derivative(pre, out)


def finite_diff_gradient(loss_fn: Callable[[Vector], float], params: Vector,
                         epsilon: float = 1e-5) -> Vector:
    """
    Gradiente por diferencias centrales: (L(p+εeᵢ) − L(p−εeᵢ)) / 2ε.

    Args:
        loss_fn: Función escalar y determinista de un vector plano.
        params (Vector): Punto de evaluación; no se modifica.
        epsilon (float): Paso, estrictamente positivo.

    Returns:
        Vector: Estimación del gradiente con la forma de ``params``.

    Raises:
        ValueError: Si epsilon <= 0.
        EvaluationError: Si la pérdida no es finita en algún punto.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    point = np.array(params, dtype=np.float64).reshape(-1)
    grad = np.zeros_like(point)
    for i in range(point.size):
        original = point[i]
        point[i] = original + epsilon
        upper = float(loss_fn(point.copy()))
        point[i] = original - epsilon
        lower = float(loss_fn(point.copy()))
        point[i] = original
        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise EvaluationError(f"loss is not finite around coordinate {i}")
        grad[i] = (upper - lower) / (2.0 * epsilon)
    logger.debug("finite-difference gradient over %d coordinates", point.size)
    return grad.reshape(np.shape(params))
