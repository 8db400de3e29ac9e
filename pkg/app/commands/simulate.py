"""Subcomando ``simulate``: escribe metrics.csv y calls.csv sintéticos."""
import logging

from app.commands import output_dir
from app.engine.data import write_trace
from app.engine.simgen import gen_topology, load_sim_config, simulate
from app.schemas.run import RunConfig
from app.utils.config import echo_config

logger = logging.getLogger(__name__)


def register(subparsers, parents):
    parser = subparsers.add_parser(
        "simulate", parents=parents, help="generate a synthetic cascading-service trace")
    parser.add_argument("--sim-config", help="key = value file with unprefixed SimConfig keys")
    parser.add_argument("--depth", type=int, help="levels of the service tree")
    parser.add_argument("--fanout", type=int, help="children per service")
    parser.add_argument("--duration", type=int, help="simulated seconds")
    parser.add_argument("--tick", type=int, help="simulation step in seconds")
    parser.add_argument("--noise", type=float, help="relative noise std")
    parser.set_defaults(handler=run, overrides=overrides)


def overrides(args) -> dict:
    """
    Claves ``sim.*`` del archivo ``--sim-config`` y, por encima, las banderas
    que se hayan indicado.
    """
    values = {}
    if args.sim_config:
        sim = load_sim_config(args.sim_config)
        values.update({f"sim.{key}": getattr(sim, key) for key in sorted(sim.model_fields_set)})
    flags = {
        "sim.depth": args.depth,
        "sim.fanout": args.fanout,
        "sim.duration_s": args.duration,
        "sim.tick_s": args.tick,
        "sim.noise_std_frac": args.noise,
    }
    values.update({key: value for key, value in flags.items() if value is not None})
    return values


def run(args, config: RunConfig) -> int:
    """
    Simula el árbol de servicios configurado y escribe la traza canónica.

    Returns:
        int: Código de salida 0.
    """
    out = output_dir(config)
    trace = simulate(gen_topology(config.sim), config.sim)
    write_trace(trace, out / "metrics.csv", out / "calls.csv")
    echo_config(config, out)
    logger.info("trace written to %s", out)
    return 0
