"""Modelo de configuración de entrenamiento"""
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class TrainConfig(BaseModel):
    """
    Esquema Pydantic con los hiperparámetros del bucle de entrenamiento.

    Atributos:
        epochs (int): Número máximo de épocas (secuencia completa por época).
        learning_rate (float): Tasa de aprendizaje de Adam.
        adam_beta1 (float): Decaimiento del primer momento.
        adam_beta2 (float): Decaimiento del segundo momento.
        adam_eps (float): Término de estabilidad numérica.
        grad_clip_norm (Optional[float]): Norma global máxima del gradiente, o None.
        early_stop_patience (int): Épocas sin mejora en validación antes de parar.
        log_every (int): Cada cuántas épocas se registra un resumen en INFO.
        record_timing (bool): Si se escriben los segundos por época en history.csv.
        seed (Optional[int]): Si se indica, sustituye la semilla de inicialización.
    """
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(500, ge=0)
    learning_rate: float = Field(1e-3, gt=0.0)
    adam_beta1: float = Field(0.9, gt=0.0, lt=1.0)
    adam_beta2: float = Field(0.999, gt=0.0, lt=1.0)
    adam_eps: float = Field(1e-8, gt=0.0)
    grad_clip_norm: Optional[float] = Field(5.0, gt=0.0)
    early_stop_patience: int = Field(100, ge=1)
    log_every: int = Field(50, ge=1)
    record_timing: bool = False
    seed: Optional[int] = Field(None, ge=0, lt=2**64)

    @field_validator("grad_clip_norm", mode="before")
    @classmethod
    def none_literal(cls, value):
        # "none" en archivos key = value desactiva el recorte
        if isinstance(value, str) and value.strip().lower() in ("none", ""):
            return None
        return value


class EpochRecord(BaseModel):
    """
    Registro de una época completada.

    Atributos:
        epoch (int): Número de época (desde 1).
        train_loss (float): MSE sobre la partición de entrenamiento.
        val_loss (float): MSE sobre la partición de validación.
        seconds (float): Duración de la época en segundos de reloj.
    """
    epoch: int
    train_loss: float
    val_loss: float
    seconds: float
