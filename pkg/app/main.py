"""Punto de entrada de la CLI: ``python -m app.main <comando>``."""
import argparse
import logging
import sys
from typing import List, Optional

from app.commands import evaluate, predict, simulate, sweep, train
from app.utils.config import build_run_config
from app.utils.errors import CascadeError, ConfigError
from app.utils.log import setup_logging

logger = logging.getLogger(__name__)

COMMANDS = (simulate, train, predict, evaluate, sweep)


class ArgumentParser(argparse.ArgumentParser):
    """Errores de uso con código de salida 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def common_parser() -> ArgumentParser:
    parser = ArgumentParser(add_help=False)
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--seed", type=int, help="single source of randomness")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    return parser


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="cascadecast", description="spatiotemporal forecasting of service metrics")
    subparsers = parser.add_subparsers(dest="command", required=True)
    parents = [common_parser()]
    for command in COMMANDS:
        command.register(subparsers, parents)
    return parser


def parse_set(pairs: List[str]) -> dict:
    """``["train.epochs=10"]`` → ``{"train.epochs": "10"}``."""
    values = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        values[key.strip()] = value.strip()
    return values


def main(argv: Optional[List[str]] = None) -> int:
    """
    Ejecuta un subcomando y devuelve el código de salida.

    Returns:
        int: 0 éxito, 1 error de uso, 2 error de datos, 3 divergencia.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        overrides = {
            **{key: value for key, value in args.overrides(args).items() if value is not None},
            "seed": args.seed,
            "out_dir": args.out,
            **parse_set(args.set),
        }
        config = build_run_config(args.config, overrides)
        return args.handler(args, config)
    except CascadeError as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
