"""Grafos de servicios por ventana y operador de propagación normalizado."""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Literal, Sequence, Tuple

import numpy as np

from app.engine.numcore import Matrix
from app.utils.errors import DegenerateGraphError, DimensionError, InsufficientDataError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int, float]


@dataclass(frozen=True)
class GraphSnapshot:
    """
    Grafo de servicios observado en una ventana.

    Atributos:
        window_index (int): Ordinal de la ventana.
        window_start (int): Inicio de la ventana en segundos epoch.
        node_ids (Tuple[str, ...]): Servicios presentes, en orden.
        edges (Tuple[Edge, ...]): Aristas (origen, destino, peso >= 0) por índice.
        features (Matrix): Una fila de d características por nodo.
        event_count (int): Eventos de métricas agregados en la ventana.
    """
    window_index: int
    window_start: int
    node_ids: Tuple[str, ...]
    edges: Tuple[Edge, ...]
    features: Matrix
    event_count: int = 0

    def __post_init__(self):
        n = len(self.node_ids)
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DimensionError(
                f"features shape {self.features.shape} does not match {n} nodes")
        for src, dst, weight in self.edges:
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"edge ({src}, {dst}) out of range for {n} nodes")
            if weight < 0:
                raise ValueError(f"edge ({src}, {dst}) has negative weight {weight}")

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)


@dataclass(frozen=True)
class PropagationOperator:
    """Operador N × N que mezcla cada nodo con sus vecinos en una capa GCN."""
    matrix: Matrix
    mode: str = field(default="symmetric")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def adjacency(snapshot: GraphSnapshot, symmetrize: Literal["max", "sum"] = "max") -> Matrix:
    """
    Adyacencia ponderada no dirigida de una instantánea.

    Las aristas dirigidas repetidas se suman primero; luego cada par se pliega
    con ``max`` (A[i][j] = max(w_ij, w_ji)) o ``sum`` (w_ij + w_ji). La diagonal
    queda en cero.

    Args:
        snapshot (GraphSnapshot): Instantánea válida.
        symmetrize (str): "max" o "sum".

    Returns:
        Matrix: Adyacencia N × N simétrica.
    """
    n = snapshot.num_nodes
    directed = np.zeros((n, n), dtype=np.float64)
    for src, dst, weight in snapshot.edges:
        if src != dst:
            directed[src, dst] += weight
    if symmetrize == "max":
        return np.maximum(directed, directed.T)
    if symmetrize == "sum":
        return directed + directed.T
    raise ValueError(f"unknown symmetrize mode '{symmetrize}'")


def add_self_loops(a: Matrix) -> Matrix:
    """
    Â = A + I.

    Raises:
        DimensionError: Si ``a`` no es cuadrada.
    """
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"adjacency must be square, got {a.shape}")
    return a + np.eye(a.shape[0])


def normalize(a_hat: Matrix, mode: Literal["symmetric", "random_walk"] = "symmetric") -> PropagationOperator:
    """
    Normaliza la adyacencia con lazos: D̂^(−1/2) Â D̂^(−1/2) (``symmetric``) o
    D̂^(−1) Â (``random_walk``), con D̂ᵢᵢ = Σⱼ Âᵢⱼ.

    Args:
        a_hat (Matrix): Adyacencia cuadrada, no negativa, con lazos.
        mode (str): Variante de normalización.

    Returns:
        PropagationOperator: El operador normalizado.

    Raises:
        DimensionError: Si ``a_hat`` no es cuadrada.
        DegenerateGraphError: Si alguna fila suma cero.
    """
    if a_hat.ndim != 2 or a_hat.shape[0] != a_hat.shape[1]:
        raise DimensionError(f"adjacency must be square, got {a_hat.shape}")
    if np.any(a_hat < 0):
        raise ValueError("adjacency entries must be non-negative")
    degree = a_hat.sum(axis=1)
    empty = np.flatnonzero(degree <= 0.0)
    if empty.size:
        raise DegenerateGraphError(f"rows {empty.tolist()} have zero degree")
    if mode == "symmetric":
        inv_sqrt = 1.0 / np.sqrt(degree)
        matrix = inv_sqrt[:, None] * a_hat * inv_sqrt[None, :]
        # Simetría exacta, no solo hasta redondeo
        matrix = 0.5 * (matrix + matrix.T)
    elif mode == "random_walk":
        matrix = a_hat / degree[:, None]
    else:
        raise ValueError(f"unknown normalization mode '{mode}'")
    return PropagationOperator(matrix=matrix, mode=mode)


def propagation_operator(snapshot: GraphSnapshot, symmetrize: str = "max",
                         mode: str = "symmetric") -> PropagationOperator:
    """Composición adjacency → add_self_loops → normalize para una instantánea."""
    return normalize(add_self_loops(adjacency(snapshot, symmetrize)), mode)


def align_to_vocabulary(snapshots: Sequence[GraphSnapshot]
                        ) -> Tuple[Tuple[str, ...], List[GraphSnapshot], np.ndarray]:
    """
    Reindexa todas las ventanas sobre un vocabulario global común.

    El vocabulario es la unión de los node_ids ordenada lexicográficamente. Los
    nodos ausentes reciben una fila de ceros, ninguna arista y máscara 0.

    Args:
        snapshots (Sequence[GraphSnapshot]): Ventanas en orden temporal.

    Returns:
        tuple: (vocabulario, instantáneas alineadas, máscaras T × N de 0/1).

    Raises:
        InsufficientDataError: Si la lista está vacía.
    """
    if not snapshots:
        raise InsufficientDataError("cannot align an empty list of snapshots")
    vocabulary = tuple(sorted(set().union(*(s.node_ids for s in snapshots))))
    position = {node: i for i, node in enumerate(vocabulary)}
    n = len(vocabulary)
    d = max((s.features.shape[1] for s in snapshots), default=0)

    aligned: List[GraphSnapshot] = []
    masks = np.zeros((len(snapshots), n), dtype=np.float64)
    for t, snapshot in enumerate(snapshots):
        index = np.array([position[node] for node in snapshot.node_ids], dtype=int)
        features = np.zeros((n, d), dtype=np.float64)
        if index.size:
            features[index] = snapshot.features
            masks[t, index] = 1.0
        edges = tuple((int(index[src]), int(index[dst]), weight)
                      for src, dst, weight in snapshot.edges)
        aligned.append(replace(snapshot, node_ids=vocabulary, edges=edges, features=features))
    logger.debug("aligned %d windows over %d services", len(snapshots), n)
    return vocabulary, aligned, masks
