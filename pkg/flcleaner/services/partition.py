from typing import Dict, List
import logging

import numpy as np

from flcleaner.models.dataset import LabeledDataset, Partition
from flcleaner.utils.exceptions import (
    PartitionException, PartitionSupplyException, ValidationException,
)

logger = logging.getLogger(__name__)

MAX_DIRICHLET_ATTEMPTS = 100


def largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    """Reparte total unidades según proporciones conservando la suma exacta."""
    raw = np.asarray(proportions, dtype=np.float64) * total
    counts = np.floor(raw).astype(np.int64)
    remaining = total - int(counts.sum())
    if remaining > 0:
        # orden estable: a igual resto gana el índice más bajo
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:remaining]] += 1
    return counts


def partition_dirichlet(dataset: LabeledDataset, num_clients: int, alpha: float, seed: int) -> Partition:
    """Sesgo de etiquetas: cada clase se reparte según q_n ~ Dir(alpha, ..., alpha)."""
    if num_clients < 1:
        raise ValidationException("num_clients", "debe ser >= 1")
    if alpha <= 0:
        raise ValidationException("alpha", "debe ser > 0")

    rng = np.random.default_rng(seed)
    classes = np.unique(dataset.labels)

    for attempt in range(1, MAX_DIRICHLET_ATTEMPTS + 1):
        assignments: Dict[int, List[int]] = {c: [] for c in range(num_clients)}
        for label in classes:
            idx = rng.permutation(np.flatnonzero(dataset.labels == label))
            q = rng.dirichlet(np.full(num_clients, alpha))
            counts = largest_remainder(q, idx.shape[0])
            bounds = np.concatenate([[0], np.cumsum(counts)])
            for client in range(num_clients):
                assignments[client].extend(idx[bounds[client]:bounds[client + 1]].tolist())
        if all(assignments.values()):
            return Partition(assignments, seed=seed, scheme="dirichlet")
        logger.warning(f"Dirichlet draw {attempt} left an empty client, redrawing")

    raise PartitionException(
        f"no se pudo obtener una partición sin clientes vacíos en {MAX_DIRICHLET_ATTEMPTS} intentos"
    )


def inverse_law_demand(client_index: int, alpha: float, gamma: int, r: int) -> int:
    """D_s(c) = floor(alpha / (c + r)) + gamma."""
    return int(np.floor(alpha / (client_index + r))) + gamma


def partition_inverse_law(
    dataset: LabeledDataset,
    num_clients: int,
    alpha: float,
    gamma: int,
    r: int,
    seed: int,
) -> Partition:
    """Sesgo de cantidad: el cliente c recibe D_s(c) muestras sin reemplazo de dos clases."""
    if num_clients < 1:
        raise ValidationException("num_clients", "debe ser >= 1")
    if r < 1:
        raise ValidationException("r", "debe ser >= 1")

    rng = np.random.default_rng(seed)
    classes = np.unique(dataset.labels)
    if classes.shape[0] < 2:
        raise PartitionException("se necesitan al menos dos clases")
    pools = {int(label): rng.permutation(np.flatnonzero(dataset.labels == label)).tolist() for label in classes}
    cursors = {label: 0 for label in pools}

    assignments: Dict[int, List[int]] = {}
    for client in range(num_clients):
        first, second = sorted(int(c) for c in rng.choice(classes, size=2, replace=False))
        demand = inverse_law_demand(client, alpha, gamma, r)
        if demand < 1:
            raise PartitionException(f"el cliente {client} recibiría 0 muestras")
        left_first = len(pools[first]) - cursors[first]
        left_second = len(pools[second]) - cursors[second]
        if demand > left_first + left_second:
            raise PartitionSupplyException(client, demand, left_first + left_second)

        take_first = min((demand + 1) // 2, left_first)
        take_second = demand - take_first
        if take_second > left_second:
            take_second = left_second
            take_first = demand - take_second

        chosen = pools[first][cursors[first]:cursors[first] + take_first]
        chosen += pools[second][cursors[second]:cursors[second] + take_second]
        cursors[first] += take_first
        cursors[second] += take_second
        assignments[client] = chosen

    return Partition(assignments, seed=seed, scheme="inverse_law")
