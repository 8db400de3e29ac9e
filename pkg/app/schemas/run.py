"""Configuración efectiva de una ejecución de la CLI."""
from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.schemas.model import ModelConfig
from app.schemas.sim import SimConfig
from app.schemas.train import TrainConfig


class RunConfig(BaseModel):
    """
    Esquema Pydantic que fusiona valores por defecto, entorno, archivo de
    configuración y banderas de línea de comandos.

    Atributos:
        metrics_path (str): CSV de métricas por servicio.
        calls_path (str): CSV de llamadas entre servicios.
        out_dir (str): Directorio de salida.
        window_len_s (int): Longitud de ventana en segundos.
        horizon_steps (int): Horizonte Δt en ventanas.
        train_fraction (float): Fracción cronológica de entrenamiento.
        val_fraction (float): Fracción cronológica de validación.
        seed (int): Única fuente de aleatoriedad; se propaga a model, train y sim.
        n_jobs (int): Celdas de barrido en paralelo.
        sweep_windows_min (List[int]): Tamaños de ventana del barrido, en minutos.
        sweep_amplitude_rps (float): Semiamplitud de la carga en el barrido de bandas.
        sweep_duration_s (int): Duración simulada por banda.
        sweep_tick_s (int): Paso de simulación por banda. Por defecto una
            muestra por ventana, de modo que el ruido no se promedia.
        model (ModelConfig): Arquitectura.
        train (TrainConfig): Optimización.
        sim (SimConfig): Simulador.
    """
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    metrics_path: str = "metrics.csv"
    calls_path: str = "calls.csv"
    out_dir: str = "out"
    window_len_s: int = Field(600, gt=0)
    horizon_steps: int = Field(1, ge=1)
    train_fraction: float = Field(0.6, gt=0.0, lt=1.0)
    val_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    seed: int = Field(0, ge=0, lt=2**64)
    n_jobs: int = 1
    sweep_windows_min: List[int] = Field(default_factory=lambda: [5, 10, 30, 60])
    sweep_amplitude_rps: float = Field(250.0, ge=0.0)
    sweep_duration_s: int = Field(180000, gt=0)
    sweep_tick_s: int = Field(600, gt=0)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    sim: SimConfig = Field(default_factory=SimConfig)

    @field_validator("sweep_windows_min", mode="before")
    @classmethod
    def split_windows(cls, value):
        if isinstance(value, str):
            return [int(part) for part in value.split(",") if part.strip()]
        return value

    def concurrency_sim(self) -> SimConfig:
        """Mundo simulado de cada celda del barrido de bandas."""
        return self.sim.model_copy(update={"duration_s": self.sweep_duration_s, "tick_s": self.sweep_tick_s})

    @model_validator(mode="after")
    def propagate_seed(self):
        if self.train_fraction + self.val_fraction >= 1.0:
            raise ValueError("train_fraction + val_fraction must be < 1")
        # Una sola semilla explícita gobierna toda la aleatoriedad
        self.model.seed = self.seed
        self.train.seed = self.seed
        self.sim.seed = self.seed
        return self
