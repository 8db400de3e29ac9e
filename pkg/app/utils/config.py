"""Configuración de ejecución: .env, archivos ``key = value`` y banderas de la CLI."""
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Type, TypeVar

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from app.schemas.run import RunConfig
from app.utils.errors import ConfigError

logger = logging.getLogger(__name__)

# Cargar las variables de entorno desde el archivo .env
load_dotenv()

# Variables de entorno reconocidas → clave de RunConfig
ENV_KEYS = {
    "CASCADECAST_SEED": "seed",
    "CASCADECAST_OUT_DIR": "out_dir",
}
SECTIONS = ("model", "train", "sim")
EFFECTIVE_CONFIG = "effective_config.txt"

M = TypeVar("M", bound=BaseModel)


def read_kv_file(path) -> Dict[str, str]:
    """
    Lee un archivo UTF-8 de líneas ``key = value``; ignora comentarios ``#`` y
    líneas en blanco.

    Raises:
        ConfigError: Si el archivo no existe, una línea no tiene ``=`` o una
            clave se repite.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    values: Dict[str, str] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{path}:{number}: duplicate key '{key}'")
        values[key] = value
    return values


def _error_key(error: dict, prefix: str) -> str:
    loc = ".".join(str(part) for part in error["loc"])
    return f"{prefix}{loc}" if loc else prefix.rstrip(".") or "config"


def validate_section(model: Type[M], values: Mapping[str, Any], prefix: str = "") -> M:
    """
    Construye ``model`` con ``values`` y traduce los errores de Pydantic a
    ConfigError nombrando la clave.
    """
    try:
        return model(**values)
    except ValidationError as e:
        error = e.errors()[0]
        key = _error_key(error, prefix)
        if error["type"] == "extra_forbidden":
            raise ConfigError(f"unknown config key '{key}'") from e
        raise ConfigError(f"invalid value for '{key}': {error['msg']}") from e


def nest(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """``{"model.gcn_layers": "2"}`` → ``{"model": {"gcn_layers": "2"}}``."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        section, dot, name = key.partition(".")
        if not dot:
            nested[key] = value
            continue
        if section not in SECTIONS or not name or "." in name:
            raise ConfigError(f"unknown config key '{key}'")
        nested.setdefault(section, {})[name] = value
    return nested


def env_values(environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    """Valores de RunConfig tomados del entorno (incluido .env)."""
    environ = os.environ if environ is None else environ
    return {key: environ[var] for var, key in ENV_KEYS.items() if environ.get(var)}


def build_run_config(config_path=None, overrides: Optional[Mapping[str, Any]] = None,
                     environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """
    Fusiona la configuración por precedencia: valores por defecto < entorno <
    archivo ``--config`` < banderas de la CLI.

    Args:
        config_path: Archivo ``key = value`` opcional.
        overrides (Mapping, optional): Claves con puntos desde la CLI.
        environ (Mapping, optional): Entorno a usar en vez de ``os.environ``.

    Returns:
        RunConfig: Configuración efectiva validada.

    Raises:
        ConfigError: Clave desconocida o valor inválido; el mensaje nombra la clave.
    """
    flat: Dict[str, Any] = env_values(environ)
    if config_path is not None:
        flat.update(read_kv_file(config_path))
    flat.update({key: value for key, value in (overrides or {}).items() if value is not None})
    config = validate_section(RunConfig, nest(flat))
    logger.debug("effective config: %s", config.model_dump())
    return config


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], (list, tuple)):
            return ", ".join(f"{_format(t)}:{_format(r)}" for t, r in value)
        return ",".join(_format(item) for item in value)
    return str(value)


def flatten(config: BaseModel) -> Dict[str, str]:
    """Claves con puntos y valores en el formato de los archivos de configuración."""
    flat: Dict[str, str] = {}
    for key, value in config.model_dump(mode="python").items():
        if isinstance(value, dict):
            for name, inner in value.items():
                flat[f"{key}.{name}"] = _format(inner)
        else:
            flat[key] = _format(value)
    return flat


def render_config(config: BaseModel) -> str:
    return "".join(f"{key} = {value}\n" for key, value in sorted(flatten(config).items()))


def echo_config(config: RunConfig, out_dir) -> Path:
    """
    Escribe ``effective_config.txt`` en ``out_dir`` con claves ordenadas; con
    ``--config`` reproduce la ejecución.
    """
    path = Path(out_dir) / EFFECTIVE_CONFIG
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_config(config), encoding="utf-8")
    return path
