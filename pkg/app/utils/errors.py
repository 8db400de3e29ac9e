"""Excepciones del motor de pronóstico.

Cada excepción lleva un ``detail`` legible y un ``exit_code`` que la CLI
devuelve tal cual al sistema operativo (0 éxito, 1 uso, 2 datos, 3 divergencia).
"""


class CascadeError(Exception):
    """
    Excepción base del proyecto.

    Atributos:
        detail (str): Mensaje de una línea que se muestra al usuario.
        exit_code (int): Código de salida asociado a la familia de error.
    """
    exit_code = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class UsageError(CascadeError):
    """Uso incorrecto de la CLI o de la API interna."""
    exit_code = 1


class ConfigError(UsageError):
    """Configuración inválida: claves desconocidas, valores fuera de rango."""


class ModelUsageError(UsageError):
    """Caché de forward ausente u obsoleta, o gradientes con otra estructura."""


class DimensionError(CascadeError, ValueError):
    """Formas de matrices incompatibles."""
    exit_code = 1


class DataError(CascadeError):
    """Errores derivados de los datos de entrada."""


class TraceParseError(DataError):
    """Fila mal formada en un CSV de trazas."""

    def __init__(self, detail: str, line: int | None = None):
        super().__init__(detail)
        self.line = line


class TraceValidationError(DataError):
    """Valor fuera de rango en un CSV de trazas."""

    def __init__(self, detail: str, field: str, line: int | None = None):
        super().__init__(detail)
        self.field = field
        self.line = line


class InsufficientDataError(DataError):
    """No hay suficientes ventanas o nodos presentes."""


class SplitError(DataError):
    """Alguna partición cronológica quedaría vacía."""


class DegenerateGraphError(DataError):
    """Fila con suma cero al normalizar el operador de propagación."""


class CheckpointError(DataError):
    """Checkpoint truncado, corrupto o con formas que no cuadran."""


class NoDataError(DataError):
    """Métrica sobre una máscara vacía."""


class NoParticipantsError(NoDataError):
    """MSE sin pares nodo-ventana participantes (N = 0)."""


class DegenerateVarianceError(DataError):
    """R² con varianza de objetivos nula."""


class EvaluationError(DataError):
    """La función de pérdida devolvió un valor no finito."""


class DivergenceError(CascadeError):
    """El entrenamiento produjo una pérdida no finita."""
    exit_code = 3

    def __init__(self, detail: str, epoch: int):
        super().__init__(detail)
        self.epoch = epoch
