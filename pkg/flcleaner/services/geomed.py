from typing import List, Optional, Sequence, Union
import logging

import numpy as np

from flcleaner.utils.exceptions import ShapeMismatchException, ValidationException

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 200
# suavizado del denominador cuando el iterado coincide con un punto
SMOOTHING = 1e-12

Points = Union[np.ndarray, Sequence[np.ndarray]]


class GeometricMedian:
    """Resultado de Weiszfeld: mediana, iteraciones, convergencia y traza del objetivo."""

    def __init__(self, median: np.ndarray, iterations: int, converged: bool, objective_trace: List[float]):
        self.median = median
        self.iterations = iterations
        self.converged = converged
        self.objective_trace = objective_trace

    def __repr__(self) -> str:
        return f"GeometricMedian(dim={self.median.shape[0]}, iterations={self.iterations}, converged={self.converged})"


def _as_point_set(points: Points, weights: Optional[Sequence[float]]):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ShapeMismatchException("conjunto de puntos", "(n_puntos, dim)", pts.shape)
    if pts.shape[0] < 1:
        raise ValidationException("points", "se necesita al menos un punto")
    if weights is None:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (pts.shape[0],):
            raise ShapeMismatchException("pesos", (pts.shape[0],), w.shape)
        if np.any(w < 0) or not np.any(w > 0):
            raise ValidationException("weights", "deben ser no negativos y no todos nulos")
        w = w / w.sum()
    return pts, w


def geometric_median_objective(points: Points, median: np.ndarray, weights: Optional[Sequence[float]] = None) -> float:
    """Suma ponderada de distancias euclídeas a la mediana candidata."""
    pts, w = _as_point_set(points, weights)
    return float(w @ np.linalg.norm(pts - median, axis=1))


def geometric_median(
    points: Points,
    weights: Optional[Sequence[float]] = None,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> GeometricMedian:
    """Mediana geométrica por iteración de Weiszfeld, partiendo de la media por coordenadas."""
    pts, w = _as_point_set(points, weights)

    if pts.shape[0] == 1:
        return GeometricMedian(pts[0].copy(), 0, True, [0.0])

    median = w @ pts
    trace = [float(w @ np.linalg.norm(pts - median, axis=1))]
    converged = False
    iterations = 0

    for iterations in range(1, max_iters + 1):
        distances = np.linalg.norm(pts - median, axis=1)
        inv = w / (distances + SMOOTHING)
        updated = (inv @ pts) / inv.sum()
        step = float(np.linalg.norm(updated - median))
        median = updated
        trace.append(float(w @ np.linalg.norm(pts - median, axis=1)))
        if step < tol:
            converged = True
            break

    if not converged:
        logger.debug(f"Weiszfeld stopped after {max_iters} iterations without reaching tol={tol}")
    return GeometricMedian(median, iterations, converged, trace)
