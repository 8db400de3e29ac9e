"""Red espaciotemporal: GCN apiladas por ventana, codificación temporal,
GRU compartida por nodo a lo largo de las ventanas y cabeza MLP.

Cada bloque implementa su propio backward analítico; ``model_backward``
recorre la secuencia desenrollada en orden inverso.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from app.engine.data import SnapshotSequence
from app.engine.graph import PropagationOperator
from app.engine.numcore import Matrix, activation_grad, elementwise, matmul
from app.schemas.model import ModelConfig
from app.utils.errors import (
    ConfigError, DimensionError, InsufficientDataError, ModelUsageError, NoParticipantsError,
)

logger = logging.getLogger(__name__)

GRU_GATES = ("z", "r", "h")


def expected_shapes(config: ModelConfig) -> Dict[str, Tuple[int, int]]:
    """Nombre → forma de cada tensor entrenable, en orden canónico."""
    shapes: Dict[str, Tuple[int, int]] = {}
    width = config.input_dim + config.time_enc_dim
    for layer in range(config.gcn_layers):
        shapes[f"gcn.{layer}.W"] = (width, config.gcn_hidden)
        width = config.gcn_hidden
    for gate in GRU_GATES:
        shapes[f"gru.W_{gate}"] = (config.gcn_hidden, config.gru_hidden)
        shapes[f"gru.U_{gate}"] = (config.gru_hidden, config.gru_hidden)
        shapes[f"gru.b_{gate}"] = (1, config.gru_hidden)
    width = config.gru_hidden
    for layer, out in enumerate(config.mlp_layers):
        shapes[f"mlp.{layer}.W"] = (width, out)
        shapes[f"mlp.{layer}.b"] = (1, out)
        width = out
    return shapes


def is_bias(name: str) -> bool:
    return name.endswith(".b") or name.startswith("gru.b_")


@dataclass
class ModelParams:
    """
    Todos los pesos entrenables: W^(l) de las GCN, matrices y sesgos de la GRU
    y capas de la MLP (θ).

    Atributos:
        tensors (Dict[str, Matrix]): Tensores por nombre, en orden canónico.
    """
    tensors: Dict[str, Matrix]

    def __getitem__(self, name: str) -> Matrix:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    @property
    def names(self) -> List[str]:
        return list(self.tensors)

    @property
    def size(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def gcn_weights(self, config: ModelConfig) -> List[Matrix]:
        return [self.tensors[f"gcn.{layer}.W"] for layer in range(config.gcn_layers)]

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.reshape(-1) for t in self.tensors.values()])

    def unflatten(self, vector: np.ndarray) -> "ModelParams":
        """Nuevos parámetros con la estructura de ``self`` y los valores de ``vector``."""
        if vector.size != self.size:
            raise ModelUsageError(f"flat vector has {vector.size} entries, expected {self.size}")
        tensors, offset = {}, 0
        for name, tensor in self.tensors.items():
            tensors[name] = np.array(vector[offset:offset + tensor.size], dtype=np.float64).reshape(tensor.shape)
            offset += tensor.size
        return ModelParams(tensors)

    def zeros_like(self) -> "ModelParams":
        return ModelParams({name: np.zeros_like(t) for name, t in self.tensors.items()})

    def copy(self) -> "ModelParams":
        return ModelParams({name: t.copy() for name, t in self.tensors.items()})

    def check_structure(self, other: "ModelParams") -> None:
        """Lanza ModelUsageError si ``other`` no tiene los mismos nombres y formas."""
        if list(other.tensors) != list(self.tensors):
            raise ModelUsageError("parameter names do not match")
        for name, tensor in self.tensors.items():
            if other.tensors[name].shape != tensor.shape:
                raise ModelUsageError(
                    f"{name}: shape {other.tensors[name].shape} does not match {tensor.shape}")


@dataclass(frozen=True)
class HiddenState:
    """Estado h_i^t de la GRU, una fila por nodo del vocabulario (N × gru_hidden)."""
    h: Matrix


def init_params(config: ModelConfig) -> ModelParams:
    """
    Pesos Glorot-uniformes (cota √(6/(fan_in+fan_out))) y sesgos a cero, con un
    PRNG determinista sembrado con ``config.seed``.
    """
    rng = np.random.default_rng(config.seed)
    tensors = {}
    for name, shape in expected_shapes(config).items():
        if is_bias(name):
            tensors[name] = np.zeros(shape)
        else:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    logger.debug("initialized %d parameters with seed %d", sum(t.size for t in tensors.values()), config.seed)
    return ModelParams(tensors)


def time_encode(window_index: int, dim: int) -> np.ndarray:
    """
    Codificación sinusoidal del índice de ventana:
    [sin(t/10000^(2k/dim)), cos(t/10000^(2k/dim))] para k = 0 … dim/2 − 1.

    Raises:
        ConfigError: Si ``dim`` es impar o negativo.
    """
    if dim < 0 or dim % 2:
        raise ConfigError(f"time encoding dimension must be even and >= 0, got {dim}")
    k = np.arange(dim // 2)
    angles = window_index / np.power(10000.0, 2.0 * k / dim) if dim else np.zeros(0)
    encoding = np.empty(dim)
    encoding[0::2] = np.sin(angles)
    encoding[1::2] = np.cos(angles)
    return encoding


def gcn_forward(S: PropagationOperator | Matrix, H: Matrix, W: Matrix, activation: str) -> Matrix:
    """
    Una capa GCN: σ(S·H·W), sin sesgo.

    Raises:
        DimensionError: Si las formas no encajan.
    """
    matrix = S.matrix if isinstance(S, PropagationOperator) else S
    return elementwise(matmul(matmul(matrix, H), W), activation)


def _gcn_stack(S: Matrix, X: Matrix, params: ModelParams, config: ModelConfig):
    cache = []
    H = X
    for W in params.gcn_weights(config):
        SH = matmul(S, H)
        pre = matmul(SH, W)
        out = elementwise(pre, config.gcn_activation)
        cache.append((SH, pre, out))
        H = out
    return H, cache


def gcn_stack(S: PropagationOperator | Matrix, X_with_time: Matrix, params: ModelParams,
              config: ModelConfig) -> Matrix:
    """L capas GCN sobre las características ya concatenadas con la codificación temporal (z^t)."""
    matrix = S.matrix if isinstance(S, PropagationOperator) else S
    z, _ = _gcn_stack(matrix, X_with_time, params, config)
    return z


def _gru_step(z: Matrix, h_prev: Matrix, params: ModelParams):
    if h_prev.shape[0] != z.shape[0]:
        raise DimensionError(f"GRU input {z.shape} and state {h_prev.shape} disagree on nodes")
    u = elementwise(matmul(z, params["gru.W_z"]) + matmul(h_prev, params["gru.U_z"]) + params["gru.b_z"], "sigmoid")
    r = elementwise(matmul(z, params["gru.W_r"]) + matmul(h_prev, params["gru.U_r"]) + params["gru.b_r"], "sigmoid")
    rh = r * h_prev
    c = elementwise(matmul(z, params["gru.W_h"]) + matmul(rh, params["gru.U_h"]) + params["gru.b_h"], "tanh")
    h = (1.0 - u) * h_prev + u * c
    return h, (z, h_prev, u, r, rh, c)


def gru_cell(z_t: Matrix, h_prev: Matrix | HiddenState, params: ModelParams) -> HiddenState:
    """
    GRU estándar con parámetros compartidos por todos los nodos, fila a fila:
    u = σ(zW_z + hU_z + b_z), r = σ(zW_r + hU_r + b_r),
    h̃ = tanh(zW_h + (r∘h)U_h + b_h), h' = (1−u)∘h + u∘h̃.
    """
    previous = h_prev.h if isinstance(h_prev, HiddenState) else h_prev
    h, _ = _gru_step(z_t, previous, params)
    return HiddenState(h)


def _mlp(h: Matrix, params: ModelParams, config: ModelConfig):
    cache = []
    q = h
    last = len(config.mlp_layers) - 1
    for layer in range(len(config.mlp_layers)):
        pre = matmul(q, params[f"mlp.{layer}.W"]) + params[f"mlp.{layer}.b"]
        cache.append((q, pre))
        q = pre if layer == last else elementwise(pre, "relu")
    return q, cache


def mlp_forward(h: Matrix | HiddenState, params: ModelParams, config: ModelConfig) -> Matrix:
    """Capas afines con relu intermedia; la última es afín sin activación (N × 1)."""
    state = h.h if isinstance(h, HiddenState) else h
    y, _ = _mlp(state, params, config)
    return y


@dataclass
class WindowCache:
    """Intermedios de una ventana para el backward."""
    S: Matrix
    X: Matrix
    mask: Matrix
    gcn: list
    gru: tuple
    mlp: Optional[list] = None


@dataclass
class ForwardCache:
    """Intermedios de una pasada completa y los parámetros usados."""
    params: ModelParams
    config: ModelConfig
    windows: List[WindowCache] = field(default_factory=list)
    warmup_steps: int = 0


@dataclass
class ForwardPass:
    """
    Resultado de model_forward.

    Atributos:
        predictions (np.ndarray): Fila j = predicción ŷ^(t+Δt) emitida en la
            ventana t = warmup + j, (T − warmup) × N; cero en nodos ausentes.
        prediction_masks (np.ndarray): Presencia en t de cada predicción.
        supervised_count (int): Filas iniciales que tienen objetivo.
        final_state (HiddenState): Estado tras la última ventana.
        cache (ForwardCache): Intermedios para model_backward.
    """
    predictions: np.ndarray
    prediction_masks: np.ndarray
    supervised_count: int
    final_state: HiddenState
    cache: ForwardCache

    @property
    def supervised_predictions(self) -> np.ndarray:
        return self.predictions[:self.supervised_count]


def model_forward(seq: SnapshotSequence, params: ModelParams, config: ModelConfig,
                  h0: Optional[HiddenState] = None) -> ForwardPass:
    """
    Pasada hacia delante sobre toda la secuencia: S_t, z_t = gcn_stack, h_t = GRU.

    Los nodos ausentes (máscara 0) conservan su estado y no reciben predicción.
    Se emite ŷ = mlp(h_t) en cada ventana a partir de ``seq.warmup_steps``.

    Raises:
        InsufficientDataError: Si la secuencia no tiene ventanas.
    """
    if seq.num_windows == 0:
        raise InsufficientDataError("cannot run the model on an empty window range")
    operators = seq.operators(config.symmetrize, config.normalization)
    n = seq.num_nodes
    h = np.zeros((n, config.gru_hidden)) if h0 is None else h0.h
    if h.shape != (n, config.gru_hidden):
        raise DimensionError(f"initial state {h.shape} does not match ({n}, {config.gru_hidden})")

    cache = ForwardCache(params=params, config=config, warmup_steps=seq.warmup_steps)
    predictions = []
    for t, snapshot in enumerate(seq.snapshots):
        mask = seq.presence_masks[t][:, None]
        encoding = time_encode(snapshot.window_index, config.time_enc_dim)
        X = np.hstack([snapshot.features, mask * encoding[None, :]])
        z, gcn_cache = _gcn_stack(operators[t].matrix, X, params, config)
        h_new, gru_cache = _gru_step(z, h, params)
        h = mask * h_new + (1.0 - mask) * h
        window = WindowCache(S=operators[t].matrix, X=X, mask=mask, gcn=gcn_cache, gru=gru_cache)
        if t >= seq.warmup_steps:
            y, window.mlp = _mlp(h, params, config)
            predictions.append(y[:, 0] * mask[:, 0])
        cache.windows.append(window)

    emitted = np.array(predictions).reshape(len(predictions), n)
    supervised = len(seq.supervised_windows)
    return ForwardPass(
        predictions=emitted,
        prediction_masks=seq.presence_masks[seq.warmup_steps:],
        supervised_count=supervised,
        final_state=HiddenState(h),
        cache=cache,
    )


def supervised_targets(seq: SnapshotSequence) -> Tuple[np.ndarray, np.ndarray]:
    """
    Objetivos y máscara de los puntos supervisados de ``seq``.

    Un par (t, i) participa si el nodo está presente en t y en t + Δt.
    """
    rows = seq.supervised_windows
    y = seq.targets[rows.start:rows.stop]
    mask = seq.presence_masks[rows.start:rows.stop] * seq.target_masks[rows.start:rows.stop]
    return y, mask


def mse_loss(y: np.ndarray, y_hat: np.ndarray, mask: np.ndarray) -> float:
    """
    L = (1/N) Σ (y − ŷ)² sobre los pares con máscara 1; N = número de pares.

    Raises:
        NoParticipantsError: Si N = 0.
    """
    y, y_hat, mask = np.asarray(y, float), np.asarray(y_hat, float), np.asarray(mask, float)
    if y.shape != y_hat.shape or y.shape != mask.shape:
        raise DimensionError(f"shapes differ: y {y.shape}, y_hat {y_hat.shape}, mask {mask.shape}")
    count = mask.sum()
    if count == 0:
        raise NoParticipantsError("no participating node-window pairs")
    return float(np.sum(mask * (y - y_hat) ** 2) / count)


def mse_loss_grad(y: np.ndarray, y_hat: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """∂L/∂ŷ de mse_loss."""
    count = np.sum(mask)
    if count == 0:
        raise NoParticipantsError("no participating node-window pairs")
    return 2.0 * mask * (y_hat - y) / count


def _mlp_backward(dy: Matrix, cache: list, params: ModelParams, grads: Dict[str, Matrix]) -> Matrix:
    dq = dy
    last = len(cache) - 1
    for layer in range(last, -1, -1):
        q, pre = cache[layer]
        dpre = dq if layer == last else dq * (pre > 0.0)
        grads[f"mlp.{layer}.W"] += q.T @ dpre
        grads[f"mlp.{layer}.b"] += dpre.sum(axis=0, keepdims=True)
        dq = dpre @ params[f"mlp.{layer}.W"].T
    return dq


def _gru_backward(dh: Matrix, cache: tuple, params: ModelParams, grads: Dict[str, Matrix]):
    z, h_prev, u, r, rh, c = cache
    du = dh * (c - h_prev)
    dc = dh * u
    dh_prev = dh * (1.0 - u)

    da_h = dc * (1.0 - c * c)
    grads["gru.W_h"] += z.T @ da_h
    grads["gru.U_h"] += rh.T @ da_h
    grads["gru.b_h"] += da_h.sum(axis=0, keepdims=True)
    dz = da_h @ params["gru.W_h"].T
    drh = da_h @ params["gru.U_h"].T
    dh_prev += drh * r

    da_r = drh * h_prev * r * (1.0 - r)
    grads["gru.W_r"] += z.T @ da_r
    grads["gru.U_r"] += h_prev.T @ da_r
    grads["gru.b_r"] += da_r.sum(axis=0, keepdims=True)
    dz += da_r @ params["gru.W_r"].T
    dh_prev += da_r @ params["gru.U_r"].T

    da_z = du * u * (1.0 - u)
    grads["gru.W_z"] += z.T @ da_z
    grads["gru.U_z"] += h_prev.T @ da_z
    grads["gru.b_z"] += da_z.sum(axis=0, keepdims=True)
    dz += da_z @ params["gru.W_z"].T
    dh_prev += da_z @ params["gru.U_z"].T
    return dz, dh_prev


def _gcn_backward(dout: Matrix, S: Matrix, cache: list, params: ModelParams,
                  grads: Dict[str, Matrix], config: ModelConfig) -> None:
    for layer in range(len(cache) - 1, -1, -1):
        SH, pre, out = cache[layer]
        dpre = dout * activation_grad(config.gcn_activation, pre, out)
        grads[f"gcn.{layer}.W"] += SH.T @ dpre
        if layer:
            dout = S.T @ (dpre @ params[f"gcn.{layer}.W"].T)


def model_backward(cache: Optional[ForwardCache], grad_predictions: np.ndarray) -> ModelParams:
    """
    Gradiente analítico ∂L/∂p de todos los parámetros, retropropagado por la
    MLP, la GRU desenrollada en todas las ventanas y todas las capas GCN.

    Args:
        cache (ForwardCache): Caché de la misma pasada hacia delante.
        grad_predictions (np.ndarray): ∂L/∂ŷ; puede cubrir solo las primeras
            filas (las supervisadas) de ``ForwardPass.predictions``.

    Returns:
        ModelParams: Gradientes con la misma estructura que los parámetros.

    Raises:
        ModelUsageError: Si la caché falta o no corresponde al gradiente.
    """
    if cache is None or not cache.windows:
        raise ModelUsageError("model_backward needs the cache of a forward pass")
    params, config = cache.params, cache.config
    emitted = len(cache.windows) - cache.warmup_steps
    n = cache.windows[0].mask.shape[0]
    grad_predictions = np.asarray(grad_predictions, dtype=np.float64)
    if grad_predictions.ndim != 2 or grad_predictions.shape[1] != n or grad_predictions.shape[0] > emitted:
        raise ModelUsageError(
            f"stale cache: gradient shape {grad_predictions.shape} does not fit {emitted} x {n} predictions")
    padded = np.zeros((emitted, n))
    padded[:grad_predictions.shape[0]] = grad_predictions

    grads = params.zeros_like().tensors
    dh_next = np.zeros((n, config.gru_hidden))
    for t in range(len(cache.windows) - 1, -1, -1):
        window = cache.windows[t]
        dh = dh_next
        if window.mlp is not None:
            dy = (padded[t - cache.warmup_steps] * window.mask[:, 0])[:, None]
            dh = dh + _mlp_backward(dy, window.mlp, params, grads)
        dh_new = window.mask * dh
        dz, dh_prev = _gru_backward(dh_new, window.gru, params, grads)
        _gcn_backward(dz, window.S, window.gcn, params, grads, config)
        dh_next = dh_prev + (1.0 - window.mask) * dh
    return ModelParams(grads)


def loss_and_grad(seq: SnapshotSequence, params: ModelParams, config: ModelConfig
                  ) -> Tuple[float, ModelParams]:
    """Pérdida MSE supervisada de ``seq`` y su gradiente."""
    forward = model_forward(seq, params, config)
    y, mask = supervised_targets(seq)
    y_hat = forward.supervised_predictions
    loss = mse_loss(y, y_hat, mask)
    return loss, model_backward(forward.cache, mse_loss_grad(y, y_hat, mask))


def sequence_loss(seq: SnapshotSequence, params: ModelParams, config: ModelConfig) -> float:
    """Pérdida MSE supervisada de ``seq`` sin gradiente."""
    forward = model_forward(seq, params, config)
    y, mask = supervised_targets(seq)
    return mse_loss(y, forward.supervised_predictions, mask)
