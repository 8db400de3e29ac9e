"""Ingesta de trazas, ventanas temporales y secuencias supervisadas."""
import logging
import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.engine.graph import GraphSnapshot, PropagationOperator, align_to_vocabulary, propagation_operator
from app.schemas.trace import (
    CALLS_COLUMNS, FEATURES, METRICS_COLUMNS, TARGET_FEATURE, CallRecord, TraceEvent,
)
from app.utils.errors import (
    DataError, InsufficientDataError, SplitError, TraceParseError, TraceValidationError,
)

logger = logging.getLogger(__name__)

TARGET_INDEX = FEATURES.index(TARGET_FEATURE)
STD_FLOOR = 1e-8

# Rangos válidos por columna numérica (inclusivos)
_METRIC_BOUNDS = {
    "cpu_util": (0.0, 1.0),
    "mem_util": (0.0, 1.0),
    "response_time_ms": (0.0, math.inf),
    "request_rate_rps": (0.0, math.inf),
}


class Trace(NamedTuple):
    """
    Traza canónica validada.

    Atributos:
        events (pd.DataFrame): Filas del CSV de métricas (METRICS_COLUMNS).
        calls (pd.DataFrame): Filas del CSV de llamadas (CALLS_COLUMNS).
    """
    events: pd.DataFrame
    calls: pd.DataFrame

    def event_records(self) -> List[TraceEvent]:
        return [TraceEvent(**row) for row in self.events.to_dict("records")]

    def call_records(self) -> List[CallRecord]:
        return [CallRecord(**row) for row in self.calls.to_dict("records")]


@dataclass(frozen=True)
class FeatureStats:
    """
    Media y desviación típica por característica, ajustadas en entrenamiento.

    Atributos:
        mean (np.ndarray): Media por característica (d,).
        std (np.ndarray): Desviación típica poblacional con suelo 1e−8 (d,).
        features (Tuple[str, ...]): Nombres de las características.
    """
    mean: np.ndarray
    std: np.ndarray
    features: Tuple[str, ...] = FEATURES

    def index(self, feature: str) -> int:
        return self.features.index(feature)


@dataclass(frozen=True)
class SnapshotSequence:
    """
    Ventanas alineadas sobre un vocabulario común con objetivos a horizonte Δt.

    Las ``warmup_steps`` primeras ventanas solo construyen estado oculto; los
    puntos supervisados son las ventanas t en [warmup_steps, T − Δt).

    Atributos:
        snapshots (Tuple[GraphSnapshot, ...]): Instantáneas alineadas.
        vocabulary (Tuple[str, ...]): Servicios en orden lexicográfico.
        presence_masks (np.ndarray): Máscara T × N de presencia (0/1).
        window_len_s (int): Longitud de ventana en segundos.
        horizon_steps (int): Horizonte Δt en ventanas.
        feature_stats (Optional[FeatureStats]): Estadísticas si está estandarizada.
        warmup_steps (int): Ventanas iniciales sin supervisión.
    """
    snapshots: Tuple[GraphSnapshot, ...]
    vocabulary: Tuple[str, ...]
    presence_masks: np.ndarray
    window_len_s: int
    horizon_steps: int
    feature_stats: Optional[FeatureStats] = None
    warmup_steps: int = 0
    _operators: Dict[Tuple[str, str], List[PropagationOperator]] = field(
        default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.horizon_steps < 1:
            raise ValueError("horizon_steps must be >= 1")
        if self.presence_masks.shape != (len(self.snapshots), len(self.vocabulary)):
            raise ValueError(
                f"presence_masks shape {self.presence_masks.shape} does not match "
                f"{len(self.snapshots)} windows x {len(self.vocabulary)} services")
        starts = [s.window_start for s in self.snapshots]
        if any(b - a != self.window_len_s for a, b in zip(starts, starts[1:])):
            raise ValueError("windows must be uniformly spaced by window_len_s")

    @property
    def num_windows(self) -> int:
        return len(self.snapshots)

    @property
    def num_nodes(self) -> int:
        return len(self.vocabulary)

    @cached_property
    def features(self) -> np.ndarray:
        """Características apiladas T × N × d."""
        return np.stack([s.features for s in self.snapshots])

    @property
    def targets(self) -> np.ndarray:
        """Fila t = objetivo (tiempo de respuesta) de la ventana t + Δt, (T − Δt) × N."""
        return self.features[self.horizon_steps:, :, TARGET_INDEX]

    @property
    def target_masks(self) -> np.ndarray:
        """Presencia en la ventana t + Δt, (T − Δt) × N."""
        return self.presence_masks[self.horizon_steps:]

    @property
    def supervised_windows(self) -> range:
        return range(self.warmup_steps, max(self.warmup_steps, self.num_windows - self.horizon_steps))

    def operators(self, symmetrize: str = "max", mode: str = "symmetric") -> List[PropagationOperator]:
        """Operadores de propagación por ventana (se calculan una sola vez)."""
        key = (symmetrize, mode)
        if key not in self._operators:
            self._operators[key] = [propagation_operator(s, symmetrize, mode) for s in self.snapshots]
        return self._operators[key]

    def truncate(self, num_windows: int, warmup_steps: int) -> "SnapshotSequence":
        """Vista con las ``num_windows`` primeras ventanas."""
        return replace(
            self,
            snapshots=self.snapshots[:num_windows],
            presence_masks=self.presence_masks[:num_windows],
            warmup_steps=warmup_steps,
        )


def _read_csv(source, columns: Sequence[str], kind: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as e:
        raise DataError(f"{kind} file not found: {source}") from e
    except pd.errors.EmptyDataError as e:
        raise TraceParseError(f"{kind}: missing header", line=1) from e
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        line = int(match.group(1)) if match else None
        raise TraceParseError(f"{kind}: malformed row at line {line}: {e}", line=line) from e
    if tuple(frame.columns) != tuple(columns):
        raise TraceParseError(
            f"{kind}: header {list(frame.columns)} does not match {list(columns)}", line=1)
    # Filas cortas quedan con NaN aun con keep_default_na=False
    short = frame.isna().any(axis=1) | (frame == "").any(axis=1)
    if short.any():
        line = int(np.flatnonzero(short.to_numpy())[0]) + 2
        raise TraceParseError(f"{kind}: malformed row at line {line}", line=line)
    return frame


def _numeric(frame: pd.DataFrame, column: str, kind: str, integral: bool = False) -> pd.Series:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna()
    if integral:
        bad |= values.notna() & (values != np.floor(values))
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise TraceParseError(
            f"{kind}: cannot parse {column}={frame[column].iloc[row]!r} at line {row + 2}",
            line=row + 2)
    return values.astype(np.int64) if integral else values.astype(np.float64)


def _check_range(values: pd.Series, column: str, low: float, high: float, kind: str) -> None:
    bad = (values < low) | (values > high)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise TraceValidationError(
            f"{kind}: {column}={values.iloc[row]} out of range [{low}, {high}] at line {row + 2}",
            field=column, line=row + 2)


def parse_trace(metrics_source, calls_source) -> Trace:
    """
    Lee y valida los CSV canónicos de métricas y de llamadas.

    Args:
        metrics_source: Ruta o archivo con cabecera METRICS_COLUMNS.
        calls_source: Ruta o archivo con cabecera CALLS_COLUMNS.

    Returns:
        Trace: Eventos y llamadas en el orden de las filas.

    Raises:
        TraceParseError: Fila mal formada; incluye el número de línea.
        TraceValidationError: Valor fuera de rango; nombra el campo.
    """
    raw = _read_csv(metrics_source, METRICS_COLUMNS, "metrics")
    events = pd.DataFrame({
        "timestamp": _numeric(raw, "timestamp", "metrics", integral=True),
        "service_id": raw["service_id"].astype(str),
    })
    for column in FEATURES:
        events[column] = _numeric(raw, column, "metrics")
        _check_range(events[column], column, *_METRIC_BOUNDS[column], "metrics")

    raw_calls = _read_csv(calls_source, CALLS_COLUMNS, "calls")
    calls = pd.DataFrame({
        "timestamp": _numeric(raw_calls, "timestamp", "calls", integral=True),
        "caller_id": raw_calls["caller_id"].astype(str),
        "callee_id": raw_calls["callee_id"].astype(str),
        "count": _numeric(raw_calls, "count", "calls", integral=True),
    })
    _check_range(calls["count"], "count", 1, math.inf, "calls")
    loops = calls["caller_id"] == calls["callee_id"]
    if loops.any():
        row = int(np.flatnonzero(loops.to_numpy())[0])
        raise TraceValidationError(
            f"calls: caller_id equals callee_id at line {row + 2}", field="caller_id", line=row + 2)

    logger.info("parsed %d metric rows and %d call rows", len(events), len(calls))
    return Trace(events=events, calls=calls)


def write_trace(trace: Trace, metrics_path, calls_path) -> None:
    """Escribe la traza con el esquema CSV canónico (UTF-8, separador decimal '.')."""
    trace.events.loc[:, list(METRICS_COLUMNS)].to_csv(
        metrics_path, index=False, lineterminator="\n", encoding="utf-8")
    trace.calls.loc[:, list(CALLS_COLUMNS)].to_csv(
        calls_path, index=False, lineterminator="\n", encoding="utf-8")


def window_events(events: pd.DataFrame, calls: pd.DataFrame, window_len_s: int,
                  start: Optional[int] = None, end: Optional[int] = None) -> List[GraphSnapshot]:
    """
    Corta la línea temporal en ventanas consecutivas sin solape [start + kL, start + (k+1)L).

    Por ventana, las características de cada servicio son la media de sus
    métricas y el peso de cada arista es la suma de llamadas caller→callee. Los
    servicios sin eventos no aparecen en la ventana, ni sus aristas.

    Args:
        events (pd.DataFrame): Eventos de métricas.
        calls (pd.DataFrame): Registros de llamadas.
        window_len_s (int): Longitud (y paso) de ventana en segundos.
        start (int, optional): Inicio; por defecto el primer timestamp.
        end (int, optional): Fin exclusivo; por defecto el último timestamp + 1.

    Returns:
        List[GraphSnapshot]: Una instantánea por ventana, vacías incluidas.
    """
    if window_len_s <= 0:
        raise ValueError("window_len_s must be > 0")
    if start is None or end is None:
        if events.empty:
            return []
        start = int(events["timestamp"].min()) if start is None else start
        end = int(events["timestamp"].max()) + 1 if end is None else end
    if end <= start:
        raise ValueError("end must be greater than start")
    num_windows = math.ceil((end - start) / window_len_s)

    inside = events[(events["timestamp"] >= start) & (events["timestamp"] < end)]
    window = (inside["timestamp"] - start) // window_len_s
    means = inside[list(FEATURES)].astype(np.float64).groupby([window, inside["service_id"]]).mean()
    counts = inside.groupby(window).size().reindex(range(num_windows), fill_value=0)
    feature_groups = {k: g.droplevel(0) for k, g in means.groupby(level=0)}

    in_calls = calls[(calls["timestamp"] >= start) & (calls["timestamp"] < end)]
    call_window = (in_calls["timestamp"] - start) // window_len_s
    weights = in_calls["count"].astype(np.int64).groupby(
        [call_window, in_calls["caller_id"], in_calls["callee_id"]]).sum()
    call_groups = {k: g.droplevel(0) for k, g in weights.groupby(level=0)}

    snapshots = []
    for k in range(num_windows):
        group = feature_groups.get(k)
        node_ids = tuple(group.index) if group is not None else ()
        features = group.to_numpy(dtype=np.float64) if group is not None else np.zeros((0, len(FEATURES)))
        position = {node: i for i, node in enumerate(node_ids)}
        edges = []
        if k in call_groups:
            for (caller, callee), total in call_groups[k].items():
                if caller in position and callee in position:
                    edges.append((position[caller], position[callee], float(total)))
                else:
                    logger.debug("window %d: dropped call %s->%s with absent endpoint", k, caller, callee)
        snapshots.append(GraphSnapshot(
            window_index=k,
            window_start=int(start + k * window_len_s),
            node_ids=node_ids,
            edges=tuple(edges),
            features=features,
            event_count=int(counts.iloc[k]),
        ))
    logger.info("built %d windows of %d s", num_windows, window_len_s)
    return snapshots


def partition_size(fraction: float, num_windows: int) -> int:
    """
    Ventanas de una fracción cronológica: redondeo al más cercano, mínimo 1.

    Se aparta del techo ⌈f·T⌉ a propósito: con T = 3 y fracciones 0.34 / 0.33
    el techo daría 2 ventanas de entrenamiento y dejaría la prueba vacía,
    mientras que el redondeo da 1/1/1.
    """
    return max(1, math.floor(fraction * num_windows + 0.5))


def make_supervised(snapshots: Sequence[GraphSnapshot], horizon_steps: int,
                    window_len_s: int) -> SnapshotSequence:
    """
    Alinea las ventanas y define los objetivos a horizonte Δt.

    Raises:
        InsufficientDataError: Si T <= horizon_steps.
    """
    if horizon_steps < 1:
        raise ValueError("horizon_steps must be >= 1")
    if len(snapshots) <= horizon_steps:
        raise InsufficientDataError(
            f"{len(snapshots)} windows are not enough for horizon {horizon_steps}")
    vocabulary, aligned, masks = align_to_vocabulary(snapshots)
    return SnapshotSequence(
        snapshots=tuple(aligned),
        vocabulary=vocabulary,
        presence_masks=masks,
        window_len_s=window_len_s,
        horizon_steps=horizon_steps,
    )


def build_sequence(trace: Trace, window_len_s: int, horizon_steps: int) -> SnapshotSequence:
    """window_events + make_supervised sobre una traza completa."""
    snapshots = window_events(trace.events, trace.calls, window_len_s)
    return make_supervised(snapshots, horizon_steps, window_len_s)


def fit_standardizer(seq: SnapshotSequence, train_fraction: float) -> FeatureStats:
    """
    Ajusta media y desviación poblacional por característica sobre los nodos
    presentes de las primeras ventanas (partition_size(train_fraction, T)).

    Raises:
        InsufficientDataError: Si no hay nodos presentes en ese tramo.
    """
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError("train_fraction must be in (0, 1]")
    count = partition_size(train_fraction, seq.num_windows)
    present = seq.presence_masks[:count] > 0
    values = seq.features[:count][present]
    if values.shape[0] == 0:
        raise InsufficientDataError("no present services in the training portion")
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    clamped = std < STD_FLOOR
    if clamped.any():
        logger.warning("constant features %s: std clamped to %g",
                       [FEATURES[i] for i in np.flatnonzero(clamped)], STD_FLOOR)
    return FeatureStats(mean=mean, std=np.maximum(std, STD_FLOOR))


def standardize(seq: SnapshotSequence, stats: FeatureStats) -> SnapshotSequence:
    """x' = (x − mean) / std sobre nodos presentes; los ausentes siguen en cero."""
    snapshots = []
    for snapshot, mask in zip(seq.snapshots, seq.presence_masks):
        scaled = (snapshot.features - stats.mean) / stats.std
        snapshots.append(replace(snapshot, features=scaled * mask[:, None]))
    return replace(seq, snapshots=tuple(snapshots), feature_stats=stats)


def unstandardize(values, stats: FeatureStats, feature: str = TARGET_FEATURE):
    """Inversa de standardize para una característica."""
    i = stats.index(feature)
    return np.asarray(values, dtype=np.float64) * stats.std[i] + stats.mean[i]


def split(seq: SnapshotSequence, train: float, val: float,
          stats: Optional[FeatureStats] = None
          ) -> Tuple[SnapshotSequence, SnapshotSequence, SnapshotSequence]:
    """
    Partición cronológica contigua (sin barajar) en entrenamiento, validación y prueba.

    Las estadísticas se ajustan solo con la partición de entrenamiento (salvo
    que se pasen ya ajustadas) y se aplican a toda la secuencia. Validación y
    prueba conservan las ventanas anteriores como calentamiento.

    Raises:
        SplitError: Si alguna partición queda vacía.
    """
    if train <= 0 or val <= 0 or train + val >= 1:
        raise SplitError(f"invalid split fractions train={train} val={val}")
    total = seq.num_windows
    n_train = partition_size(train, total)
    n_val = partition_size(val, total)
    n_test = total - n_train - n_val
    if n_test <= 0:
        raise SplitError(f"split of {total} windows leaves an empty partition "
                         f"({n_train}/{n_val}/{n_test})")
    stats = stats or fit_standardizer(seq, train)
    scaled = standardize(seq, stats)
    logger.info("split %d windows into %d/%d/%d", total, n_train, n_val, n_test)
    return (
        scaled.truncate(n_train, warmup_steps=0),
        scaled.truncate(n_train + n_val, warmup_steps=n_train),
        scaled.truncate(total, warmup_steps=n_train + n_val),
    )
