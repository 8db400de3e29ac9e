"""Métricas MAE / RMSE / R², evaluación en prueba y barridos de ventana y concurrencia."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.metrics import mean_absolute_error, mean_squared_error, r2_score

from app.engine.data import TARGET_INDEX, SnapshotSequence, Trace, build_sequence, split
from app.engine.model import ModelParams, model_forward, supervised_targets
from app.engine.simgen import band_profile, gen_topology, simulate
from app.engine.train import train_loop
from app.schemas.metrics import Metrics, SweepRow
from app.schemas.model import ModelConfig
from app.schemas.sim import BANDS, ConcurrencyBand, SimConfig
from app.schemas.train import TrainConfig
from app.utils.errors import ConfigError, DataError, DegenerateVarianceError, DimensionError, NoDataError

logger = logging.getLogger(__name__)

PUBLISHED_REFERENCE: Dict[str, Any] = {
    "label": "paper-reported, not reproduced",
    "table": [
        {"model": "ASTGCN", "mae": 0.165, "rmse": 0.251, "r2": 0.879},
        {"model": "DGCRN", "mae": 0.157, "rmse": 0.238, "r2": 0.892},
        {"model": "Graph WaveNet", "mae": 0.142, "rmse": 0.221, "r2": 0.911},
        {"model": "GCN-GRU with time encoding", "mae": 0.123, "rmse": 0.197, "r2": 0.941},
    ],
    "window": "best results at a 10-minute window; accuracy degrades beyond 30 minutes",
    "concurrency": "R2 consistently above 0.90 from Low to High concurrency",
}


def _select(y, y_hat, mask):
    y, y_hat = np.asarray(y, dtype=np.float64), np.asarray(y_hat, dtype=np.float64)
    mask = np.ones_like(y) if mask is None else np.asarray(mask, dtype=np.float64)
    if y.shape != y_hat.shape or y.shape != mask.shape:
        raise DimensionError(f"shapes differ: y {y.shape}, y_hat {y_hat.shape}, mask {mask.shape}")
    keep = mask > 0
    if not keep.any():
        raise NoDataError("no masked-in pairs to evaluate")
    return y[keep], y_hat[keep]


def mae(y, y_hat, mask=None) -> float:
    """
    Error absoluto medio sobre los pares con máscara 1.

    Raises:
        NoDataError: Si la máscara está vacía.
    """
    y, y_hat = _select(y, y_hat, mask)
    return float(mean_absolute_error(y, y_hat))


def rmse(y, y_hat, mask=None) -> float:
    """Raíz del error cuadrático medio sobre los pares con máscara 1."""
    y, y_hat = _select(y, y_hat, mask)
    return float(np.sqrt(mean_squared_error(y, y_hat)))


def r2(y, y_hat, mask=None) -> float:
    """
    1 − Σ(y − ŷ)² / Σ(y − ȳ)² con ȳ la media enmascarada.

    Raises:
        NoDataError: Si la máscara está vacía.
        DegenerateVarianceError: Si los objetivos no tienen varianza.
    """
    y, y_hat = _select(y, y_hat, mask)
    if y.size < 2 or np.all(y == y[0]):
        raise DegenerateVarianceError("r2 is undefined for zero-variance targets")
    return float(r2_score(y, y_hat))


def metrics(y, y_hat, mask=None) -> Metrics:
    """Las tres métricas y el número de pares evaluados."""
    count = int(np.count_nonzero(np.asarray(mask) > 0)) if mask is not None else int(np.size(y))
    return Metrics(mae=mae(y, y_hat, mask), rmse=rmse(y, y_hat, mask), r2=r2(y, y_hat, mask), n=count)


def evaluate(params: ModelParams, config: ModelConfig, test_seq: SnapshotSequence) -> Metrics:
    """
    Métricas del modelo en la partición de prueba, en unidades estandarizadas.

    El estado oculto se construye desde el inicio de la secuencia; solo se
    puntúan las ventanas supervisadas posteriores al calentamiento.
    """
    forward = model_forward(test_seq, params, config)
    y, mask = supervised_targets(test_seq)
    result = metrics(y, forward.supervised_predictions, mask)
    logger.info("evaluated %d pairs: mae=%.4f rmse=%.4f r2=%.4f", result.n, result.mae, result.rmse, result.r2)
    return result


def persistence_baseline(seq: SnapshotSequence) -> Metrics:
    """Pronóstico ingenuo ŷ(t + Δt) = y(t) sobre los mismos pares que evaluate."""
    rows = seq.supervised_windows
    current = seq.features[rows.start:rows.stop, :, TARGET_INDEX]
    y, mask = supervised_targets(seq)
    return metrics(y, current, mask)


def cell_seed(seed: int, index: int) -> int:
    """Semilla independiente por celda derivada de (seed, índice)."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _fit_and_score(seq: SnapshotSequence, model_config: ModelConfig, train_config: TrainConfig,
                   train_fraction: float, val_fraction: float, seed: int) -> tuple:
    train_seq, val_seq, test_seq = split(seq, train_fraction, val_fraction)
    params, _ = train_loop(
        train_seq, val_seq,
        model_config.model_copy(update={"seed": seed}),
        train_config.model_copy(update={"seed": seed}),
    )
    return evaluate(params, model_config, test_seq), persistence_baseline(test_seq)


def _window_cell(trace: Trace, minutes: int, index: int, model_config: ModelConfig,
                 train_config: TrainConfig, horizon_steps: int, train_fraction: float,
                 val_fraction: float, seed: int) -> SweepRow:
    seed = cell_seed(seed, index)
    try:
        seq = build_sequence(trace, minutes * 60, horizon_steps)
        result, baseline = _fit_and_score(seq, model_config, train_config, train_fraction, val_fraction, seed)
    except DataError as e:
        logger.warning("window %d min skipped: %s", minutes, e.detail)
        return SweepRow(label=str(minutes), seed=seed, skipped=e.detail)
    logger.info("window %d min: mae=%.4f persistence=%.4f", minutes, result.mae, baseline.mae)
    return SweepRow(label=str(minutes), metrics=result, persistence_mae=baseline.mae, seed=seed)


def window_sweep(trace: Trace, windows_min: Sequence[int], model_config: ModelConfig,
                 train_config: TrainConfig, horizon_steps: int = 1, train_fraction: float = 0.6,
                 val_fraction: float = 0.2, seed: int = 0, n_jobs: int = 1) -> List[SweepRow]:
    """
    Pipeline completo (ventanas → partición → entrenamiento → evaluación) por
    cada tamaño de ventana, reentrenando desde cero.

    Args:
        trace (Trace): Traza cruda.
        windows_min (Sequence[int]): Tamaños de ventana en minutos, sin repetir.
        model_config (ModelConfig): Arquitectura.
        train_config (TrainConfig): Optimización.
        horizon_steps (int): Horizonte Δt.
        train_fraction (float): Fracción de entrenamiento.
        val_fraction (float): Fracción de validación.
        seed (int): Semilla base; cada celda usa SeedSequence([seed, índice]).
        n_jobs (int): Celdas en paralelo (joblib).

    Returns:
        List[SweepRow]: Una fila por ventana; las que no tienen datos suficientes
        quedan marcadas como omitidas con el motivo.

    Raises:
        ConfigError: Si hay tamaños repetidos o no positivos.
    """
    windows = list(windows_min)
    if len(set(windows)) != len(windows):
        raise ConfigError(f"duplicate window sizes in {windows}")
    if not windows or any(w <= 0 for w in windows):
        raise ConfigError(f"window sizes must be positive minutes, got {windows}")
    return Parallel(n_jobs=n_jobs)(
        delayed(_window_cell)(trace, minutes, index, model_config, train_config,
                              horizon_steps, train_fraction, val_fraction, seed)
        for index, minutes in enumerate(windows)
    )


def _band_cell(band: ConcurrencyBand, index: int, sim_config: SimConfig, model_config: ModelConfig,
               train_config: TrainConfig, window_len_s: int, horizon_steps: int, train_fraction: float,
               val_fraction: float, amplitude_rps: float, seed: int) -> SweepRow:
    seed = cell_seed(seed, index)
    profile = band_profile(band, amplitude_rps, sim_config.profile_period_s, sim_config.duration_s)
    config = sim_config.model_copy(update={"load_profile": profile, "start_time": 0, "seed": seed})
    trace = simulate(gen_topology(config), config)
    seq = build_sequence(trace, window_len_s, horizon_steps)
    result, baseline = _fit_and_score(seq, model_config, train_config, train_fraction, val_fraction, seed)
    logger.info("band %s: mae=%.4f r2=%.4f persistence=%.4f", band.name.value, result.mae, result.r2, baseline.mae)
    return SweepRow(label=band.name.value, metrics=result, persistence_mae=baseline.mae, seed=seed)


def concurrency_sweep(sim_config: SimConfig, model_config: ModelConfig, train_config: TrainConfig,
                      bands: Sequence[ConcurrencyBand] = BANDS, window_len_s: int = 600,
                      horizon_steps: int = 1, train_fraction: float = 0.6, val_fraction: float = 0.2,
                      amplitude_rps: float = 250.0, seed: int = 0, n_jobs: int = 1) -> List[SweepRow]:
    """
    Por banda: simula con una carga sinusoidal centrada en la banda, entrena y
    evalúa. El ruido del simulador crece con la utilización, así que las bandas
    altas son más difíciles de predecir.

    Returns:
        List[SweepRow]: Una fila por banda, en el orden recibido.
    """
    return Parallel(n_jobs=n_jobs)(
        delayed(_band_cell)(band, index, sim_config, model_config, train_config, window_len_s,
                            horizon_steps, train_fraction, val_fraction, amplitude_rps, seed)
        for index, band in enumerate(bands)
    )


def sweep_frame(rows: Sequence[SweepRow], kind: str) -> pd.DataFrame:
    label = "window_min" if kind == "window" else "band"
    records = []
    for row in rows:
        values = row.metrics.model_dump() if row.metrics is not None else {}
        records.append({label: row.label, "mae": values.get("mae"), "rmse": values.get("rmse"),
                        "r2": values.get("r2")})
    return pd.DataFrame(records, columns=[label, "mae", "rmse", "r2"])


def write_sweep_csv(rows: Sequence[SweepRow], path, kind: str) -> Path:
    """CSV ``window_min,mae,rmse,r2`` o ``band,mae,rmse,r2``; las filas omitidas van sin métricas."""
    path = Path(path)
    sweep_frame(rows, kind).to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
    return path


def build_report(kind: str, config: Dict[str, str], rows: Sequence[SweepRow]) -> Dict[str, Any]:
    """Informe del barrido con la configuración efectiva y las cifras publicadas de referencia."""
    return {
        "kind": kind,
        "config": dict(config),
        "rows": [row.model_dump(mode="json") for row in rows],
        "published_reference": PUBLISHED_REFERENCE,
    }


def write_json(document: Dict[str, Any], path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def metrics_document(result: Metrics, baseline: Optional[Metrics] = None) -> Dict[str, Any]:
    document: Dict[str, Any] = result.model_dump()
    if baseline is not None:
        document["persistence"] = baseline.model_dump()
    return document
