"""Optimizador Adam y bucle de entrenamiento de secuencia completa."""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from app.engine.data import SnapshotSequence
from app.engine.model import ModelParams, init_params, loss_and_grad, sequence_loss
from app.schemas.model import ModelConfig
from app.schemas.train import EpochRecord, TrainConfig
from app.utils.errors import DimensionError, DivergenceError, InsufficientDataError, ModelUsageError

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "seconds")


@dataclass
class AdamState:
    """Primer y segundo momento por tensor."""
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]

    @classmethod
    def zeros(cls, params: ModelParams) -> "AdamState":
        return cls(
            m={name: np.zeros_like(t) for name, t in params.tensors.items()},
            v={name: np.zeros_like(t) for name, t in params.tensors.items()},
        )


@dataclass
class TrainHistory:
    """Un registro por época completada."""
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def val_losses(self) -> List[float]:
        return [r.val_loss for r in self.records]

    def to_frame(self, include_timing: bool = False) -> pd.DataFrame:
        frame = pd.DataFrame([r.model_dump() for r in self.records], columns=list(HISTORY_COLUMNS))
        if not include_timing:
            # Sin reloj, history.csv es idéntico entre ejecuciones
            frame["seconds"] = ""
        return frame

    def write_csv(self, path, include_timing: bool = False) -> None:
        """Escribe ``epoch,train_loss,val_loss,seconds``."""
        self.to_frame(include_timing).to_csv(
            path, index=False, lineterminator="\n", float_format="%.17g")


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState, config: TrainConfig,
              step: int) -> Tuple[ModelParams, AdamState]:
    """
    Un paso de Adam con corrección de sesgo.

    Args:
        params (ModelParams): Parámetros actuales; no se modifican.
        grads (ModelParams): Gradientes con la misma estructura.
        state (AdamState): Momentos acumulados.
        config (TrainConfig): Tasa de aprendizaje, betas y epsilon.
        step (int): Número de paso, desde 1.

    Returns:
        tuple: (nuevos parámetros, nuevo estado).

    Raises:
        ModelUsageError: Si la estructura no coincide o step < 1.
    """
    if step < 1:
        raise ModelUsageError(f"adam step must be >= 1, got {step}")
    params.check_structure(grads)
    if list(state.m) != params.names:
        raise ModelUsageError("optimizer state does not match the parameters")
    b1, b2 = config.adam_beta1, config.adam_beta2
    tensors, m, v = {}, {}, {}
    for name, p in params.tensors.items():
        g = grads[name]
        m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = m[name] / (1.0 - b1 ** step)
        v_hat = v[name] / (1.0 - b2 ** step)
        tensors[name] = p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return ModelParams(tensors), AdamState(m=m, v=v)


def global_norm(grads: ModelParams) -> float:
    return float(np.sqrt(sum(np.sum(g * g) for g in grads.tensors.values())))


def clip_by_global_norm(grads: ModelParams, max_norm: Optional[float]) -> ModelParams:
    """Reescala los gradientes si su norma L2 global supera ``max_norm``."""
    if max_norm is None:
        return grads
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return ModelParams({name: g * scale for name, g in grads.tensors.items()})


def _check_supervised(seq: SnapshotSequence, name: str) -> None:
    if len(seq.supervised_windows) == 0:
        raise InsufficientDataError(f"{name} sequence has no supervised windows")


def train_loop(train_seq: SnapshotSequence, val_seq: SnapshotSequence, model_config: ModelConfig,
               train_config: TrainConfig, params: Optional[ModelParams] = None
               ) -> Tuple[ModelParams, TrainHistory]:
    """
    Entrena con épocas de secuencia completa: forward sobre todas las ventanas,
    mse_loss, model_backward, recorte opcional por norma global y adam_step.

    Tras cada actualización se mide la pérdida de validación; se conservan los
    parámetros con la menor y se para tras ``early_stop_patience`` épocas sin
    mejora.

    Args:
        train_seq (SnapshotSequence): Partición de entrenamiento.
        val_seq (SnapshotSequence): Partición de validación (con calentamiento).
        model_config (ModelConfig): Arquitectura.
        train_config (TrainConfig): Hiperparámetros de optimización.
        params (ModelParams, optional): Punto de partida; por defecto init_params.

    Returns:
        tuple: (mejores parámetros, historial).

    Raises:
        InsufficientDataError: Si alguna secuencia no tiene ventanas supervisadas.
        DivergenceError: Si la pérdida deja de ser finita.
    """
    _check_supervised(train_seq, "training")
    _check_supervised(val_seq, "validation")
    if params is None:
        if train_config.seed is not None:
            model_config = model_config.model_copy(update={"seed": train_config.seed})
        params = init_params(model_config)

    history = TrainHistory()
    best, best_val = params, np.inf
    state = AdamState.zeros(params)
    stale = 0
    for epoch in range(1, train_config.epochs + 1):
        started = time.perf_counter()
        try:
            train_loss, grads = loss_and_grad(train_seq, params, model_config)
            if not np.isfinite(train_loss):
                raise DivergenceError(f"training loss became {train_loss} at epoch {epoch}", epoch=epoch)
            grads = clip_by_global_norm(grads, train_config.grad_clip_norm)
            params, state = adam_step(params, grads, state, train_config, epoch)
            val_loss = sequence_loss(val_seq, params, model_config)
        except DimensionError:
            raise
        except (ValueError, FloatingPointError) as e:
            # Entradas no finitas en las activaciones tras divergir
            raise DivergenceError(f"training diverged at epoch {epoch}: {e}", epoch=epoch) from e
        if not np.isfinite(val_loss):
            raise DivergenceError(f"validation loss became {val_loss} at epoch {epoch}", epoch=epoch)

        history.records.append(EpochRecord(
            epoch=epoch, train_loss=train_loss, val_loss=val_loss,
            seconds=time.perf_counter() - started))
        logger.debug("epoch %d train=%.6f val=%.6f", epoch, train_loss, val_loss)
        if epoch % train_config.log_every == 0:
            logger.info("epoch %d/%d train_loss=%.6f val_loss=%.6f",
                        epoch, train_config.epochs, train_loss, val_loss)

        if val_loss < best_val:
            best, best_val, stale = params, val_loss, 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= train_config.early_stop_patience:
                logger.info("early stop at epoch %d (no improvement for %d epochs)", epoch, stale)
                break

    if history.best_epoch is not None:
        logger.info("best epoch %d with val_loss=%.6f", history.best_epoch, best_val)
    return best, history
