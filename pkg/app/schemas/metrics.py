"""Modelo de métricas de evaluación"""
from typing import Optional

from pydantic import BaseModel, Field


class Metrics(BaseModel):
    """
    Esquema Pydantic para el triple MAE / RMSE / R² de una evaluación.

    Atributos:
        mae (float): Error absoluto medio.
        rmse (float): Raíz del error cuadrático medio.
        r2 (float): Coeficiente de determinación.
        n (int): Número de pares nodo-ventana evaluados.
    """
    mae: float = Field(ge=0.0)
    rmse: float = Field(ge=0.0)
    r2: float = Field(le=1.0)
    n: int = Field(ge=0)


class SweepRow(BaseModel):
    """
    Fila de un barrido (ventanas o bandas de concurrencia).

    Atributos:
        label (str): Tamaño de ventana en minutos o nombre de la banda.
        metrics (Optional[Metrics]): Métricas del modelo; None si la fila se omitió.
        persistence_mae (Optional[float]): MAE del pronóstico de persistencia.
        seed (int): Semilla derivada de la celda.
        skipped (Optional[str]): Motivo por el que la celda no se ejecutó.
    """
    label: str
    metrics: Optional[Metrics] = None
    persistence_mae: Optional[float] = None
    seed: int
    skipped: Optional[str] = None
