"""Simulador determinista de trazas de servicios en cascada.

Un árbol de servicios recibe carga en la raíz; cada servicio reparte su carga a
partes iguales entre sus hijos y su tiempo de respuesta extremo a extremo es
su latencia propia más el máximo (o la suma, en modo serie) de los tiempos de
respuesta de sus hijos.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from app.engine.data import Trace
from app.schemas.sim import BANDS, ConcurrencyBand, SimConfig
from app.schemas.trace import CALLS_COLUMNS, METRICS_COLUMNS
from app.utils.config import read_kv_file, validate_section
from app.utils.errors import UsageError

logger = logging.getLogger(__name__)

MAX_UTILIZATION = 0.95
POINTS_PER_PERIOD = 32


@dataclass(frozen=True)
class ServiceNode:
    """
    Servicio del árbol simulado.

    Atributos:
        service_id (str): ``svc-<nivel>-<índice>``.
        level (int): Profundidad (0 = gateway).
        index (int): Posición dentro del nivel.
        parent (Optional[int]): Posición del padre en ``Topology.nodes``.
        base_service_time_ms (float): Tiempo de servicio sin carga.
        capacity_rps (float): Capacidad propia.
        traffic_share (float): Fracción de la carga de la raíz que recibe.
    """
    service_id: str
    level: int
    index: int
    parent: Optional[int]
    base_service_time_ms: float
    capacity_rps: float
    traffic_share: float


@dataclass(frozen=True)
class Topology:
    """Árbol de servicios en orden por niveles y aristas caller → callee (posiciones)."""
    nodes: Tuple[ServiceNode, ...]
    edges: Tuple[Tuple[int, int], ...]

    def children(self, position: int) -> List[int]:
        return [callee for caller, callee in self.edges if caller == position]

    @property
    def service_ids(self) -> List[str]:
        return [node.service_id for node in self.nodes]


def gen_topology(config: SimConfig, seed: Optional[int] = None) -> Topology:
    """
    Árbol completo de aridad ``fanout`` y ``depth`` niveles con raíz en el gateway.

    Si ``base_service_time_ms`` es un rango, cada nodo sortea su tiempo base
    uniformemente en él con la semilla.

    Args:
        config (SimConfig): Forma del árbol, tiempos base y capacidad.
        seed (int, optional): Semilla; por defecto ``config.seed``.

    Returns:
        Topology: Nodos ``svc-<nivel>-<índice>`` y aristas del árbol.
    """
    rng = np.random.default_rng([config.seed if seed is None else seed, 0])
    nodes: List[ServiceNode] = []
    edges: List[Tuple[int, int]] = []
    level_start = 0
    for level in range(config.depth):
        width = config.fanout ** level
        share = 1.0 / width
        for index in range(width):
            parent = None if level == 0 else level_start - config.fanout ** (level - 1) + index // config.fanout
            if isinstance(config.base_service_time_ms, tuple):
                base = float(rng.uniform(*config.base_service_time_ms))
            else:
                base = float(config.base_service_time_ms)
            nodes.append(ServiceNode(
                service_id=f"svc-{level}-{index}",
                level=level,
                index=index,
                parent=parent,
                base_service_time_ms=base,
                capacity_rps=config.capacity_rps * share,
                traffic_share=share,
            ))
            if parent is not None:
                edges.append((parent, len(nodes) - 1))
        level_start += width
    logger.debug("topology with %d services and %d edges", len(nodes), len(edges))
    return Topology(nodes=tuple(nodes), edges=tuple(edges))


def utilization(node: ServiceNode, offered_rps) -> np.ndarray:
    return np.asarray(offered_rps, dtype=np.float64) / node.capacity_rps


def node_latency(node: ServiceNode, offered_rps, noise_std_frac: float = 0.0,
                 rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Latencia propia de un servicio: base × 1/(1 − ρ), ρ = min(carga/capacidad, 0.95),
    con ruido gaussiano multiplicativo de desviación noise_std_frac × (1 + ρ).

    Args:
        node (ServiceNode): Servicio.
        offered_rps: Carga ofrecida (escalar o arreglo), >= 0.
        noise_std_frac (float): Desviación relativa del ruido.
        rng (np.random.Generator, optional): Flujo de ruido; obligatorio si hay ruido.

    Returns:
        np.ndarray: Tiempo de respuesta en ms (no negativo).
    """
    offered = np.asarray(offered_rps, dtype=np.float64)
    if np.any(offered < 0):
        raise ValueError("offered_rps must be >= 0")
    rho = np.minimum(utilization(node, offered), MAX_UTILIZATION)
    core = node.base_service_time_ms / (1.0 - rho)
    if noise_std_frac == 0.0:
        return core
    if rng is None:
        raise ValueError("a random generator is required when noise_std_frac > 0")
    noise = rng.standard_normal(core.shape) * noise_std_frac * (1.0 + rho)
    return np.maximum(core * (1.0 + noise), 0.0)


def sinusoidal_profile(low_rps: float, high_rps: float, period_s: float, duration_s: float,
                       points: Optional[int] = None) -> List[Tuple[float, float]]:
    """
    Perfil periódico: sinusoide entre ``low_rps`` (en t = 0) y ``high_rps``.

    Sin ``points`` se toman POINTS_PER_PERIOD puntos por periodo.
    """
    if points is None:
        points = max(2, math.ceil(duration_s / period_s * POINTS_PER_PERIOD) + 1)
    times = np.linspace(0.0, duration_s, points)
    rps = low_rps + (high_rps - low_rps) * 0.5 * (1.0 - np.cos(2.0 * np.pi * times / period_s))
    return [(float(t), float(r)) for t, r in zip(times, rps)]


def band_profile(band: ConcurrencyBand, amplitude_rps: float, period_s: float, duration_s: float,
                 points: Optional[int] = None) -> List[Tuple[float, float]]:
    """
    Sinusoide centrada en la banda. La semiamplitud se recorta para no salir
    del rango representativo de la banda.
    """
    lower, upper = band.profile_range
    center = 0.5 * (lower + upper)
    amplitude = min(amplitude_rps, 0.5 * (upper - lower) * 0.99)
    return sinusoidal_profile(center - amplitude, center + amplitude, period_s, duration_s, points)


def load_at(config: SimConfig, times) -> np.ndarray:
    """
    Carga ofrecida en la raíz en cada instante. Los tiempos del perfil son
    segundos desde ``start_time``; entre puntos se interpola linealmente.
    """
    offsets = np.asarray(times, dtype=np.float64) - config.start_time
    if config.load_profile is None:
        low, high = config.profile_low_rps, config.profile_high_rps
        return low + (high - low) * 0.5 * (1.0 - np.cos(2.0 * np.pi * offsets / config.profile_period_s))
    profile = np.array(config.load_profile, dtype=np.float64)
    return np.interp(offsets, profile[:, 0], profile[:, 1])


def simulate(topology: Topology, config: SimConfig) -> Trace:
    """
    Genera una traza con el esquema CSV canónico.

    Por tick: carga de la raíz según el perfil, repartida a partes iguales a
    los hijos; tiempo de respuesta = latencia propia + max (o suma) de los
    hijos; cpu_util = ρ recortada a [0, 1]; mem_util = 0.3 + 0.5ρ recortada;
    llamadas por arista = carga del hijo × tick_s redondeada (las de 0 no se
    emiten).

    Args:
        topology (Topology): Árbol de servicios.
        config (SimConfig): Perfil, ruido, duración y paso.

    Returns:
        Trace: Eventos en orden tick → servicio y llamadas en orden tick → arista.
    """
    rng = np.random.default_rng([config.seed, 1])
    num_ticks = config.duration_s // config.tick_s
    times = config.start_time + config.tick_s * np.arange(num_ticks, dtype=np.int64)
    root_load = load_at(config, times)

    n = len(topology.nodes)
    load = np.outer(root_load, [node.traffic_share for node in topology.nodes])
    own = np.empty((num_ticks, n))
    for i, node in enumerate(topology.nodes):
        own[:, i] = node_latency(node, load[:, i], config.noise_std_frac, rng)

    response = own.copy()
    # Orden por niveles: los hijos siempre tienen posición mayor que el padre
    for i in range(n - 1, -1, -1):
        children = topology.children(i)
        if not children:
            continue
        downstream = response[:, children]
        if config.fanout_mode == "parallel":
            response[:, i] += downstream.max(axis=1)
        else:
            response[:, i] += downstream.sum(axis=1)

    rho = load / np.array([node.capacity_rps for node in topology.nodes])
    events = pd.DataFrame({
        "timestamp": np.repeat(times, n),
        "service_id": np.tile(topology.service_ids, num_ticks),
        "cpu_util": np.clip(rho, 0.0, 1.0).reshape(-1),
        "mem_util": np.clip(0.3 + 0.5 * rho, 0.0, 1.0).reshape(-1),
        "response_time_ms": response.reshape(-1),
        "request_rate_rps": load.reshape(-1),
    }, columns=list(METRICS_COLUMNS))

    callees = [callee for _, callee in topology.edges]
    counts = np.rint(load[:, callees] * config.tick_s).astype(np.int64) if callees else np.zeros((num_ticks, 0), np.int64)
    calls = pd.DataFrame({
        "timestamp": np.repeat(times, len(callees)),
        "caller_id": np.tile([topology.nodes[c].service_id for c, _ in topology.edges], num_ticks),
        "callee_id": np.tile([topology.nodes[c].service_id for c in callees], num_ticks),
        "count": counts.reshape(-1),
    }, columns=list(CALLS_COLUMNS))
    calls = calls[calls["count"] > 0].reset_index(drop=True)

    logger.info("simulated %d ticks over %d services (%d metric rows, %d call rows)",
                num_ticks, n, len(events), len(calls))
    return Trace(events=events, calls=calls)


def band_of(rps: float) -> ConcurrencyBand:
    """
    Banda de concurrencia de una carga; los valores frontera pertenecen a la
    banda inferior.

    Raises:
        UsageError: Si rps es negativo.
    """
    if rps < 0:
        raise UsageError(f"rps must be >= 0, got {rps}")
    for band in BANDS:
        if band.contains(rps):
            return band
    raise UsageError(f"rps {rps} is not in any band")


def load_sim_config(path) -> SimConfig:
    """
    Lee un archivo ``key = value`` con claves de SimConfig sin prefijo.

    Raises:
        ConfigError: Si hay claves desconocidas o valores inválidos.
    """
    return validate_section(SimConfig, read_kv_file(path))
