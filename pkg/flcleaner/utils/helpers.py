# flcleaner/utils/helpers.py
from typing import Tuple
import numpy as np

NAM_EPSILON = 1e-12


def derive_rng(*keys: int) -> np.random.Generator:
    """Generador determinista derivado de una tupla de enteros (semilla, ronda, cliente...)."""
    return np.random.default_rng([int(k) for k in keys])


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Sigmoide numéricamente estable."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    exp_x = np.exp(x[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return out


def glorot_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    """Inicialización uniforme en ±sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def round_half_up(x: float) -> int:
    """Redondeo clásico (0.5 hacia arriba) para conteos."""
    return int(np.floor(x + 0.5))


def derive_seed(*keys: int) -> int:
    """Semilla entera derivada (para componentes que guardan su propia semilla)."""
    return int(derive_rng(*keys).integers(0, 2 ** 31 - 1))
