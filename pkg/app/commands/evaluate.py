"""Subcomando ``eval``: métricas del checkpoint sobre la partición de prueba."""
import logging

from app.commands import output_dir
from app.commands.train import add_trace_arguments, trace_overrides
from app.engine.data import build_sequence, parse_trace, split
from app.engine.evaluation import evaluate, metrics_document, persistence_baseline, write_json
from app.schemas.run import RunConfig
from app.utils.checkpoint import load_checkpoint
from app.utils.config import echo_config

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.json"


def register(subparsers, parents):
    parser = subparsers.add_parser("eval", parents=parents, help="score a checkpoint on the test split")
    parser.add_argument("--checkpoint", required=True, help="checkpoint written by train")
    add_trace_arguments(parser)
    parser.set_defaults(handler=run, overrides=trace_overrides)


def run(args, config: RunConfig) -> int:
    """
    Reproduce la partición de entrenamiento con las estadísticas guardadas y
    escribe MAE / RMSE / R² del modelo y del pronóstico de persistencia.
    """
    checkpoint = load_checkpoint(args.checkpoint)
    out = output_dir(config)
    trace = parse_trace(config.metrics_path, config.calls_path)
    seq = build_sequence(trace, checkpoint.window_len_s, checkpoint.horizon_steps)
    _, _, test_seq = split(seq, config.train_fraction, config.val_fraction, checkpoint.stats)

    result = evaluate(checkpoint.params, checkpoint.config, test_seq)
    baseline = persistence_baseline(test_seq)
    write_json(metrics_document(result, baseline), out / METRICS_FILE)
    echo_config(config, out)
    return 0
