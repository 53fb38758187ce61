from typing import List, Sequence, Tuple
import logging

import numpy as np

from flcleaner.models.defense import ClientScore
from flcleaner.services.defense import trust_propagate
from flcleaner.services.geomed import geometric_median, geometric_median_objective
from flcleaner.utils.exceptions import OracleMismatchException, ShapeMismatchException

logger = logging.getLogger(__name__)

GRID_STEP = 1e-3
LOCATION_TOL = 2e-3
OBJECTIVE_TOL = 1e-6
_GRID_CHUNK = 256


# =============================================================================
# GEOMETRIC MEDIAN
# =============================================================================

def grid_geometric_median(points: np.ndarray, step: float = GRID_STEP) -> Tuple[np.ndarray, float]:
    """Búsqueda exhaustiva en rejilla 2-D sobre la caja envolvente: (mejor punto, objetivo medio)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeMismatchException("puntos del oráculo", "(n, 2)", pts.shape)
    xs = np.arange(pts[:, 0].min(), pts[:, 0].max() + step / 2, step)
    ys = np.arange(pts[:, 1].min(), pts[:, 1].max() + step / 2, step)

    best, best_value = None, np.inf
    for start in range(0, xs.shape[0], _GRID_CHUNK):
        gx, gy = np.meshgrid(xs[start:start + _GRID_CHUNK], ys, indexing="ij")
        candidates = np.stack([gx.ravel(), gy.ravel()], axis=1)
        values = np.zeros(candidates.shape[0])
        for p in pts:
            values += np.hypot(candidates[:, 0] - p[0], candidates[:, 1] - p[1])
        values /= pts.shape[0]
        i = int(values.argmin())
        if values[i] < best_value:
            best, best_value = candidates[i], float(values[i])
    return best, best_value


def check_geomed_instance(points: np.ndarray) -> List[str]:
    """Problemas de Weiszfeld frente a la rejilla y a la monotonía del objetivo."""
    problems = []
    result = geometric_median(points)
    grid_point, grid_value = grid_geometric_median(points)
    value = geometric_median_objective(points, result.median)
    location_ok = np.linalg.norm(result.median - grid_point) <= LOCATION_TOL
    if not (location_ok or value <= grid_value + OBJECTIVE_TOL):
        problems.append(f"objective {value:.9f} vs grid {grid_value:.9f}")
    trace = np.asarray(result.objective_trace)
    if np.any(np.diff(trace) > 1e-12 * max(1.0, float(trace[0]))):
        problems.append("objective increased between iterations")
    return problems


def run_geomed_oracle(instances: int = 50, seed: int = 0) -> dict:
    """Compara Weiszfeld con la rejilla en conjuntos aleatorios de 3 a 7 puntos en [0, 1]²."""
    rng = np.random.default_rng(seed)
    failures = 0
    for i in range(instances):
        points = rng.random((int(rng.integers(3, 8)), 2))
        problems = check_geomed_instance(points)
        if problems:
            failures += 1
            logger.warning(f"GeoMed oracle instance {i}: {'; '.join(problems)}")
    summary = {"oracle": "geomed", "instances": instances, "failures": failures}
    if failures:
        raise OracleMismatchException("geomed", failures, instances)
    return summary


# =============================================================================
# TRUST PROPAGATION
# =============================================================================

def exhaustive_benign_prefix(epsilons: Sequence[float], lam: float) -> int:
    """Longitud del mayor prefijo ordenado sin saltos > δ, probando todos los prefijos."""
    eps = sorted(epsilons)
    delta = lam * (eps[-1] - eps[0])
    best = 1
    for k in range(1, len(eps) + 1):
        if all(eps[j + 1] - eps[j] <= delta for j in range(k - 1)):
            best = k
    return best


def check_trust_instance(epsilons: Sequence[float], lambdas: Sequence[float]) -> List[str]:
    problems = []
    previous = set()
    for lam in sorted(lambdas):
        scores = [ClientScore(i, e) for i, e in enumerate(epsilons)]
        decision = trust_propagate(scores, lam)
        expected = exhaustive_benign_prefix(epsilons, lam)
        if len(decision.benign_ids) != expected:
            problems.append(f"lambda={lam}: {len(decision.benign_ids)} accepted, oracle {expected}")
        accepted = set(decision.benign_ids)
        if not previous <= accepted:
            problems.append(f"lambda={lam}: benign set shrank")
        previous = accepted
    return problems


def run_trust_oracle(instances: int = 200, seed: int = 0, max_clients: int = 12) -> dict:
    """Trust propagation frente a la búsqueda exhaustiva y monotonía en λ."""
    rng = np.random.default_rng(seed)
    lambdas = np.linspace(0.0, 1.0, 11).tolist()
    failures = 0
    for i in range(instances):
        size = int(rng.integers(1, max_clients + 1))
        # mezcla de grupos compactos y valores aislados, con algún empate exacto
        epsilons = np.round(rng.exponential(1.0, size) * rng.choice([0.01, 1.0], size), 4).tolist()
        problems = check_trust_instance(epsilons, lambdas)
        if problems:
            failures += 1
            logger.warning(f"Trust oracle instance {i}: {'; '.join(problems)}")
    summary = {"oracle": "trust", "instances": instances, "failures": failures}
    if failures:
        raise OracleMismatchException("trust", failures, instances)
    return summary
