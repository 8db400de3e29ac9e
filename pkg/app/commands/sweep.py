"""Subcomando ``sweep``: barridos de tamaño de ventana y de bandas de concurrencia."""
import logging

from app.commands import output_dir
from app.commands.train import add_trace_arguments, trace_overrides
from app.engine.data import parse_trace
from app.engine.evaluation import build_report, concurrency_sweep, window_sweep, write_json, write_sweep_csv
from app.engine.simgen import gen_topology, simulate
from app.schemas.run import RunConfig
from app.utils.config import echo_config, flatten

logger = logging.getLogger(__name__)

SWEEP_KINDS = ("window", "concurrency")


def register(subparsers, parents):
    parser = subparsers.add_parser("sweep", parents=parents, help="run a window or concurrency sweep")
    parser.add_argument("kind", choices=SWEEP_KINDS, help="sweep to run")
    add_trace_arguments(parser)
    parser.add_argument("--windows", help="comma separated window sizes in minutes")
    parser.add_argument("--n-jobs", type=int, help="sweep cells run in parallel")
    parser.set_defaults(handler=run, overrides=overrides)


def overrides(args) -> dict:
    return {**trace_overrides(args), "sweep_windows_min": args.windows, "n_jobs": args.n_jobs}


def _window_rows(args, config: RunConfig):
    if args.metrics or args.calls:
        trace = parse_trace(config.metrics_path, config.calls_path)
    else:
        logger.info("no trace given: sweeping over the configured simulated world")
        trace = simulate(gen_topology(config.sim), config.sim)
    return window_sweep(
        trace, config.sweep_windows_min, config.model, config.train,
        horizon_steps=config.horizon_steps, train_fraction=config.train_fraction,
        val_fraction=config.val_fraction, seed=config.seed, n_jobs=config.n_jobs,
    )


def _concurrency_rows(config: RunConfig):
    return concurrency_sweep(
        config.concurrency_sim(), config.model, config.train, window_len_s=config.window_len_s,
        horizon_steps=config.horizon_steps, train_fraction=config.train_fraction,
        val_fraction=config.val_fraction, amplitude_rps=config.sweep_amplitude_rps,
        seed=config.seed, n_jobs=config.n_jobs,
    )


def run(args, config: RunConfig) -> int:
    """
    Ejecuta el barrido y escribe ``sweep_<kind>.csv`` y ``report_<kind>.json``.
    """
    out = output_dir(config)
    rows = _window_rows(args, config) if args.kind == "window" else _concurrency_rows(config)
    write_sweep_csv(rows, out / f"sweep_{args.kind}.csv", args.kind)
    write_json(build_report(args.kind, flatten(config), rows), out / f"report_{args.kind}.json")
    echo_config(config, out)
    logger.info("%s sweep finished with %d rows", args.kind, len(rows))
    return 0
