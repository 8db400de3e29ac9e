"""Guardado y carga de checkpoints del modelo en JSON autodescriptivo."""
import json
import logging
from pathlib import Path
from typing import NamedTuple

import numpy as np
from pydantic import ValidationError

from app.engine.data import FeatureStats
from app.engine.model import ModelParams, expected_shapes
from app.schemas.model import ModelConfig
from app.utils.errors import CheckpointError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class Checkpoint(NamedTuple):
    """Contenido de un checkpoint cargado."""
    params: ModelParams
    config: ModelConfig
    stats: FeatureStats
    window_len_s: int
    horizon_steps: int


def checkpoint_bytes(params: ModelParams, config: ModelConfig, stats: FeatureStats,
                     window_len_s: int, horizon_steps: int) -> bytes:
    """Serialización determinista: claves ordenadas y float64 con repr exacto."""
    document = {
        "format_version": FORMAT_VERSION,
        "config": config.model_dump(mode="json"),
        "window_len_s": int(window_len_s),
        "horizon_steps": int(horizon_steps),
        "feature_stats": {
            "features": list(stats.features),
            "mean": [float(x) for x in stats.mean],
            "std": [float(x) for x in stats.std],
        },
        "tensors": [
            {"name": name, "shape": list(tensor.shape), "values": tensor.tolist()}
            for name, tensor in params.tensors.items()
        ],
    }
    return (json.dumps(document, sort_keys=True, indent=1, allow_nan=False) + "\n").encode("utf-8")


def save_checkpoint(params: ModelParams, config: ModelConfig, stats: FeatureStats, path,
                    window_len_s: int, horizon_steps: int) -> Path:
    """
    Escribe los parámetros, la configuración y las estadísticas de
    estandarización en ``path``.

    Args:
        params (ModelParams): Parámetros entrenados.
        config (ModelConfig): Arquitectura que los produjo.
        stats (FeatureStats): Estadísticas para desestandarizar predicciones.
        path: Archivo de destino.
        window_len_s (int): Longitud de ventana usada al entrenar.
        horizon_steps (int): Horizonte Δt usado al entrenar.

    Returns:
        Path: Ruta escrita.
    """
    path = Path(path)
    path.write_bytes(checkpoint_bytes(params, config, stats, window_len_s, horizon_steps))
    logger.info("checkpoint saved to %s (%d parameters)", path, params.size)
    return path


def load_checkpoint(path) -> Checkpoint:
    """
    Lee un checkpoint y valida cada tensor contra las formas que declara la
    configuración guardada.

    Raises:
        CheckpointError: Si el archivo falta, está truncado o corrupto, o algún
            tensor no tiene la forma esperada (el mensaje nombra el tensor).
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise CheckpointError(f"checkpoint not found: {path}") from e
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CheckpointError(f"checkpoint {path} is truncated or corrupt: {e}") from e

    try:
        if document["format_version"] != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {document['format_version']}")
        config = ModelConfig(**document["config"])
        stats_doc = document["feature_stats"]
        stats = FeatureStats(
            mean=np.array(stats_doc["mean"], dtype=np.float64),
            std=np.array(stats_doc["std"], dtype=np.float64),
            features=tuple(stats_doc["features"]),
        )
        entries = {entry["name"]: entry for entry in document["tensors"]}
        window_len_s = int(document["window_len_s"])
        horizon_steps = int(document["horizon_steps"])
    except (KeyError, TypeError, ValidationError) as e:
        raise CheckpointError(f"checkpoint {path} is missing or has invalid fields: {e}") from e

    tensors = {}
    for name, shape in expected_shapes(config).items():
        if name not in entries:
            raise CheckpointError(f"tensor {name} missing from checkpoint")
        declared = tuple(entries[name]["shape"])
        if declared != shape:
            raise CheckpointError(f"tensor {name}: declared shape {declared} does not match {shape}")
        try:
            values = np.array(entries[name]["values"], dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise CheckpointError(f"tensor {name}: invalid values") from e
        if values.shape != shape:
            raise CheckpointError(f"tensor {name}: stored values have shape {values.shape}, expected {shape}")
        tensors[name] = values
    extra = set(entries) - set(tensors)
    if extra:
        raise CheckpointError(f"unexpected tensors in checkpoint: {sorted(extra)}")

    logger.info("checkpoint loaded from %s", path)
    return Checkpoint(ModelParams(tensors), config, stats, window_len_s, horizon_steps)
