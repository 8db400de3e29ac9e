"""Modelos del simulador de trazas en cascada."""
import math
from enum import Enum
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class BandName(str, Enum):
    """Bandas de concurrencia por peticiones por segundo."""
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"
    VERY_HIGH = "VeryHigh"
    EXTREME = "Extreme"


class ConcurrencyBand(BaseModel):
    """
    Banda de carga ofrecida: intervalo semiabierto (lower, upper].

    La banda Low incluye además el 0. Los valores frontera pertenecen a la
    banda inferior (1000 rps es Low).

    Atributos:
        name (BandName): Nombre de la banda.
        lower_rps (float): Límite inferior (exclusivo salvo en Low).
        upper_rps (float): Límite superior (inclusivo); infinito en Extreme.
    """
    model_config = ConfigDict(frozen=True)

    name: BandName
    lower_rps: float
    upper_rps: float

    def contains(self, rps: float) -> bool:
        if self.name is BandName.LOW:
            return 0.0 <= rps <= self.upper_rps
        return self.lower_rps < rps <= self.upper_rps

    @property
    def profile_range(self) -> Tuple[float, float]:
        """Rango representativo para generar carga centrada en la banda."""
        upper = self.upper_rps if math.isfinite(self.upper_rps) else 12000.0
        return self.lower_rps, upper


BANDS: Tuple[ConcurrencyBand, ...] = (
    ConcurrencyBand(name=BandName.LOW, lower_rps=0.0, upper_rps=1000.0),
    ConcurrencyBand(name=BandName.MEDIUM, lower_rps=1000.0, upper_rps=2500.0),
    ConcurrencyBand(name=BandName.HIGH, lower_rps=2500.0, upper_rps=5000.0),
    ConcurrencyBand(name=BandName.VERY_HIGH, lower_rps=5000.0, upper_rps=8000.0),
    ConcurrencyBand(name=BandName.EXTREME, lower_rps=8000.0, upper_rps=math.inf),
)


class SimConfig(BaseModel):
    """
    Esquema Pydantic con la forma del árbol de servicios, la ley de latencia,
    el perfil de carga y el ruido de la simulación.

    Atributos:
        depth (int): Niveles del árbol (1 = solo el gateway).
        fanout (int): Hijos por servicio.
        base_service_time_ms (float | (float, float)): Tiempo de servicio base, o
            un rango del que se sortea uno por nodo con la semilla.
        capacity_rps (float): Capacidad del gateway; cada nodo recibe capacidad
            proporcional a su cuota de tráfico.
        load_profile (Optional[List[(float, float)]]): Puntos (segundo, rps) que se
            interpolan linealmente. Si es None se usa una sinusoide entre
            profile_low_rps y profile_high_rps con periodo profile_period_s.
        noise_std_frac (float): Desviación relativa del ruido multiplicativo.
        duration_s (int): Duración simulada en segundos.
        tick_s (int): Paso de simulación en segundos.
        start_time (int): Segundo epoch del primer tick.
        fanout_mode (str): "parallel" (máximo de los hijos) o "serial" (suma).
        seed (int): Semilla del generador.
    """
    model_config = ConfigDict(extra="forbid")

    depth: int = Field(3, ge=1)
    fanout: int = Field(2, ge=1)
    base_service_time_ms: Union[float, Tuple[float, float]] = 10.0
    capacity_rps: float = Field(10000.0, gt=0.0)
    load_profile: Optional[List[Tuple[float, float]]] = None
    profile_low_rps: float = Field(200.0, ge=0.0)
    profile_high_rps: float = Field(4500.0, ge=0.0)
    profile_period_s: float = Field(7200.0, gt=0.0)
    noise_std_frac: float = Field(0.05, ge=0.0)
    duration_s: int = Field(180000, gt=0)
    tick_s: int = Field(60, gt=0)
    start_time: int = 0
    fanout_mode: Literal["parallel", "serial"] = "parallel"
    seed: int = Field(0, ge=0, lt=2**64)

    @field_validator("base_service_time_ms", mode="before")
    @classmethod
    def parse_range(cls, value):
        # "10" o "5,15"
        if isinstance(value, str):
            parts = [float(part) for part in value.split(",") if part.strip()]
            return parts[0] if len(parts) == 1 else tuple(parts)
        return value

    @field_validator("base_service_time_ms")
    @classmethod
    def positive_base(cls, value):
        values = value if isinstance(value, tuple) else (value,)
        if any(v <= 0 for v in values):
            raise ValueError("base_service_time_ms must be > 0")
        if isinstance(value, tuple) and value[0] > value[1]:
            raise ValueError("base_service_time_ms range must be lo,hi")
        return value

    @field_validator("load_profile", mode="before")
    @classmethod
    def parse_profile(cls, value):
        # "0:200, 3600:4000"
        if isinstance(value, str):
            if value.strip().lower() in ("", "none"):
                return None
            points = []
            for pair in value.split(","):
                seconds, rps = pair.split(":")
                points.append((float(seconds), float(rps)))
            return points
        return value

    @field_validator("load_profile")
    @classmethod
    def valid_profile(cls, value):
        if value is None:
            return value
        if not value:
            raise ValueError("load_profile needs at least one point")
        if any(rps < 0 for _, rps in value):
            raise ValueError("offered rps must be >= 0 at every profile point")
        times = [t for t, _ in value]
        if times != sorted(times):
            raise ValueError("load_profile times must be non-decreasing")
        return value

    @model_validator(mode="after")
    def tick_fits(self):
        if self.tick_s > self.duration_s:
            raise ValueError("tick_s must not exceed duration_s")
        if self.profile_low_rps > self.profile_high_rps:
            raise ValueError("profile_low_rps must not exceed profile_high_rps")
        return self
