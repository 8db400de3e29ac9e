"""Subcomandos de la CLI: uno por etapa del pipeline."""
from pathlib import Path

from app.schemas.run import RunConfig


def output_dir(config: RunConfig) -> Path:
    """Crea (si falta) y devuelve el directorio de salida."""
    path = Path(config.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path
