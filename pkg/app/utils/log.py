import logging
import os
import sys
from typing import Optional

LOG_LEVEL_ENV = "CASCADECAST_LOG_LEVEL"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: Optional[str] = None) -> None:
    """
    Configura el logger raíz una sola vez para toda la ejecución.

    Args:
        level (str, optional): Nivel de log ("DEBUG", "INFO", ...). Si no se
            proporciona se usa CASCADECAST_LOG_LEVEL (también desde .env) o INFO.
    """
    logging.basicConfig(
        level=(level or os.getenv(LOG_LEVEL_ENV) or "INFO").upper(),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )
