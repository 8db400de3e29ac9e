"""Subcomando ``predict``: pronósticos en milisegundos a partir de un checkpoint."""
import logging

import numpy as np
import pandas as pd

from app.commands import output_dir
from app.commands.train import add_trace_arguments, trace_overrides
from app.engine.data import build_sequence, parse_trace, standardize, unstandardize
from app.engine.model import model_forward
from app.schemas.run import RunConfig
from app.utils.checkpoint import load_checkpoint
from app.utils.config import echo_config
from app.utils.errors import ConfigError

logger = logging.getLogger(__name__)

PREDICTIONS_FILE = "predictions.csv"
PREDICTION_COLUMNS = ["window", "service_id", "predicted_response_time_ms"]


def register(subparsers, parents):
    parser = subparsers.add_parser("predict", parents=parents, help="forecast response times")
    parser.add_argument("--checkpoint", required=True, help="checkpoint written by train")
    add_trace_arguments(parser)
    parser.add_argument("--horizon", type=int, help="must match the checkpoint horizon")
    parser.set_defaults(handler=run, overrides=trace_overrides)


def predictions_frame(seq, forward, stats) -> pd.DataFrame:
    """Una fila por (ventana objetivo, servicio presente en la ventana de origen)."""
    records = []
    for row, t in enumerate(range(seq.warmup_steps, seq.num_windows)):
        target_window = seq.snapshots[t].window_index + seq.horizon_steps
        present = np.flatnonzero(forward.prediction_masks[row] > 0)
        values = unstandardize(forward.predictions[row, present], stats)
        for i, value in zip(present, values):
            records.append((target_window, seq.vocabulary[i], float(value)))
    return pd.DataFrame(records, columns=PREDICTION_COLUMNS)


def run(args, config: RunConfig) -> int:
    """
    Pronostica ŷ(t + Δt) para cada ventana t de la traza, incluidas las que
    caen después de su final, y lo desestandariza a milisegundos.

    Raises:
        ConfigError: Si ``--horizon`` no coincide con el del checkpoint.
    """
    checkpoint = load_checkpoint(args.checkpoint)
    if args.horizon is not None and args.horizon != checkpoint.horizon_steps:
        raise ConfigError(
            f"checkpoint was trained for horizon {checkpoint.horizon_steps}, got --horizon {args.horizon}")
    out = output_dir(config)
    trace = parse_trace(config.metrics_path, config.calls_path)
    seq = build_sequence(trace, checkpoint.window_len_s, checkpoint.horizon_steps)
    scaled = standardize(seq, checkpoint.stats)
    forward = model_forward(scaled, checkpoint.params, checkpoint.config)

    frame = predictions_frame(scaled, forward, checkpoint.stats)
    frame.to_csv(out / PREDICTIONS_FILE, index=False, lineterminator="\n", float_format="%.17g")
    echo_config(config, out)
    logger.info("%d predictions written to %s", len(frame), out / PREDICTIONS_FILE)
    return 0
