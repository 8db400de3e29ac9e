"""Configuración del modelo espaciotemporal."""
from typing import List, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.schemas.trace import FEATURES


class ModelConfig(BaseModel):
    """
    Esquema Pydantic con la arquitectura del modelo: GCN apiladas, codificación
    temporal, GRU compartida por nodo y cabeza MLP.

    Atributos:
        input_dim (int): Número de características por nodo (d).
        gcn_layers (int): Número de capas GCN apiladas.
        gcn_hidden (int): Anchura de cada capa GCN.
        gcn_activation (str): Activación σ de las capas GCN.
        normalization (str): Operador de propagación ("symmetric" o "random_walk").
        symmetrize (str): Cómo se pliegan las aristas dirigidas ("max" o "sum").
        time_enc_dim (int): Dimensión (par) de la codificación temporal sinusoidal.
        gru_hidden (int): Anchura del estado oculto de la GRU.
        mlp_layers (List[int]): Anchuras de la MLP; la última debe ser 1.
        seed (int): Semilla de la inicialización de pesos.
    """
    model_config = ConfigDict(extra="forbid")

    input_dim: int = Field(len(FEATURES), ge=1)
    gcn_layers: int = Field(2, ge=1)
    gcn_hidden: int = Field(32, ge=1)
    gcn_activation: Literal["relu", "tanh", "sigmoid", "identity"] = "relu"
    normalization: Literal["symmetric", "random_walk"] = "symmetric"
    symmetrize: Literal["max", "sum"] = "max"
    time_enc_dim: int = Field(2, ge=0)
    gru_hidden: int = Field(32, ge=1)
    mlp_layers: List[int] = Field(default_factory=lambda: [32, 16, 1])
    seed: int = Field(0, ge=0, lt=2**64)

    @field_validator("mlp_layers", mode="before")
    @classmethod
    def split_widths(cls, value):
        # Desde archivos key = value llega como "32,16,1"
        if isinstance(value, str):
            return [int(part) for part in value.split(",") if part.strip()]
        return value

    @field_validator("mlp_layers")
    @classmethod
    def ends_in_scalar(cls, value: List[int]) -> List[int]:
        if not value or value[-1] != 1:
            raise ValueError("final MLP width must be 1")
        if any(width < 1 for width in value):
            raise ValueError("MLP widths must be positive")
        return value

    @field_validator("time_enc_dim")
    @classmethod
    def even_time_dim(cls, value: int) -> int:
        if value % 2:
            raise ValueError("time_enc_dim must be even (sin/cos pairs)")
        return value
