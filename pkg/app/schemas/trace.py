"""Modelo de filas de trazas."""
from pydantic import BaseModel, Field, model_validator

# Orden canónico de las características por nodo (d = 4)
FEATURES = ("cpu_util", "mem_util", "response_time_ms", "request_rate_rps")
TARGET_FEATURE = "response_time_ms"

METRICS_COLUMNS = ("timestamp", "service_id") + FEATURES
CALLS_COLUMNS = ("timestamp", "caller_id", "callee_id", "count")


class TraceEvent(BaseModel):
    """
    Esquema Pydantic para una fila del CSV de métricas.

    Atributos:
        timestamp (int): Segundos epoch (enteros).
        service_id (str): Identificador del servicio.
        cpu_util (float): Fracción de CPU usada, en [0, 1].
        mem_util (float): Fracción de memoria usada, en [0, 1].
        response_time_ms (float): Tiempo de respuesta en milisegundos.
        request_rate_rps (float): Peticiones por segundo recibidas.
    """
    timestamp: int
    service_id: str
    cpu_util: float = Field(ge=0.0, le=1.0)
    mem_util: float = Field(ge=0.0, le=1.0)
    response_time_ms: float = Field(ge=0.0)
    request_rate_rps: float = Field(ge=0.0)


class CallRecord(BaseModel):
    """
    Esquema Pydantic para una fila del CSV de llamadas.

    Atributos:
        timestamp (int): Segundos epoch (enteros).
        caller_id (str): Servicio que llama.
        callee_id (str): Servicio llamado.
        count (int): Número de llamadas (al menos 1).
    """
    timestamp: int
    caller_id: str
    callee_id: str
    count: int = Field(ge=1)

    @model_validator(mode="after")
    def no_self_calls(self):
        if self.caller_id == self.callee_id:
            raise ValueError("caller_id must differ from callee_id")
        return self
