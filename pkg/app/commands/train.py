"""Subcomando ``train``: entrena y escribe checkpoint.json e history.csv."""
import logging

from app.commands import output_dir
from app.engine.data import build_sequence, fit_standardizer, parse_trace, split
from app.engine.train import train_loop
from app.schemas.run import RunConfig
from app.utils.checkpoint import save_checkpoint
from app.utils.config import echo_config

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "checkpoint.json"
HISTORY_FILE = "history.csv"


def add_trace_arguments(parser):
    parser.add_argument("--metrics", help="metrics CSV path")
    parser.add_argument("--calls", help="calls CSV path")


def trace_overrides(args) -> dict:
    return {"metrics_path": args.metrics, "calls_path": args.calls}


def register(subparsers, parents):
    parser = subparsers.add_parser("train", parents=parents, help="train the forecaster on a trace")
    add_trace_arguments(parser)
    parser.add_argument("--window", type=int, help="window length in seconds")
    parser.add_argument("--horizon", type=int, help="forecast horizon in windows")
    parser.add_argument("--epochs", type=int, help="maximum training epochs")
    parser.set_defaults(handler=run, overrides=overrides)


def overrides(args) -> dict:
    return {
        **trace_overrides(args),
        "window_len_s": args.window,
        "horizon_steps": args.horizon,
        "train.epochs": args.epochs,
    }


def run(args, config: RunConfig) -> int:
    """
    Ventanas → partición cronológica → entrenamiento; guarda los mejores
    parámetros con las estadísticas de estandarización.

    Returns:
        int: Código de salida 0.
    """
    out = output_dir(config)
    trace = parse_trace(config.metrics_path, config.calls_path)
    seq = build_sequence(trace, config.window_len_s, config.horizon_steps)
    stats = fit_standardizer(seq, config.train_fraction)
    train_seq, val_seq, _ = split(seq, config.train_fraction, config.val_fraction, stats)
    params, history = train_loop(train_seq, val_seq, config.model, config.train)

    save_checkpoint(params, config.model, stats, out / CHECKPOINT_FILE,
                    config.window_len_s, config.horizon_steps)
    history.write_csv(out / HISTORY_FILE, include_timing=config.train.record_timing)
    echo_config(config, out)
    return 0
