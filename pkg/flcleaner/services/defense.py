from abc import ABC, abstractmethod
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np

from flcleaner.core.parallel import parallel_map
from flcleaner.models.client import ClientUpdate
from flcleaner.models.cvae_state import CvaeState
from flcleaner.models.dataset import TriggerSet
from flcleaner.models.defense import ClientScore, DefenseOutcome, FilterDecision
from flcleaner.models.weights import WeightVector, ensure_same_length
from flcleaner.schemas.experiment import DefenseConfig
from flcleaner.schemas.model_spec import ModelSpec
from flcleaner.services.cvae import normalize_activations, reconstruction_errors
from flcleaner.services.geomed import DEFAULT_MAX_ITERS, DEFAULT_TOL, geometric_median
from flcleaner.services.network import activation_matrix, full_layer_mask
from flcleaner.utils.exceptions import ValidationException, validate_unit_interval

logger = logging.getLogger(__name__)


# =============================================================================
# SCORING
# =============================================================================

def score_clients_detailed(
    client_models: Sequence[WeightVector],
    spec: ModelSpec,
    trigger: TriggerSet,
    layer_mask: Optional[Sequence[int]],
    cvae: CvaeState,
    client_ids: Optional[Sequence[int]] = None,
    geomed_tol: float = DEFAULT_TOL,
    geomed_max_iters: int = DEFAULT_MAX_ITERS,
) -> Tuple[List[ClientScore], int]:
    """Puntuaciones ε por cliente y número de GeoMed por muestra que no convergieron."""
    if len(client_models) < 2:
        raise ValidationException("client_models", "se necesitan al menos 2 clientes")
    ensure_same_length(client_models)
    ids = list(client_ids) if client_ids is not None else list(range(len(client_models)))
    if len(ids) != len(client_models) or len(set(ids)) != len(ids):
        raise ValidationException("client_ids", "deben ser únicos y uno por modelo")

    mask = tuple(layer_mask) if layer_mask is not None else full_layer_mask(spec)
    # orden fijo por id: la reducción de GeoMed no depende del orden de entrada
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    ams = np.stack(parallel_map(
        lambda i: activation_matrix(client_models[i], spec, trigger.samples, mask), order,
    ))

    medians = parallel_map(
        lambda s: geometric_median(ams[:, s, :], tol=geomed_tol, max_iters=geomed_max_iters),
        range(trigger.size),
    )
    failures = sum(1 for m in medians if not m.converged)
    geomed = np.stack([m.median for m in medians])

    epsilons = parallel_map(
        lambda u: float(np.mean(reconstruction_errors(cvae, normalize_activations(ams[u], geomed), trigger.labels))),
        range(len(order)),
    )
    by_position = {order[u]: eps for u, eps in enumerate(epsilons)}
    scores = [ClientScore(ids[i], by_position[i]) for i in range(len(ids))]
    for score in scores:
        logger.debug(f"Client {score.client_id}: epsilon={score.epsilon:.6g}")
    return scores, failures


def score_clients(
    client_models: Sequence[WeightVector],
    spec: ModelSpec,
    trigger: TriggerSet,
    layer_mask: Optional[Sequence[int]],
    cvae: CvaeState,
    client_ids: Optional[Sequence[int]] = None,
) -> List[ClientScore]:
    """ε_u = media sobre el trigger set del MSE entre NAM y su reconstrucción por el CVAE."""
    scores, _ = score_clients_detailed(client_models, spec, trigger, layer_mask, cvae, client_ids)
    return scores


# =============================================================================
# FILTERS
# =============================================================================

def _decide(scores: List[ClientScore], benign: List[ClientScore], delta, lam) -> FilterDecision:
    accepted = {s.client_id for s in benign}
    for score in scores:
        score.accepted = score.client_id in accepted
    blocked = [s.client_id for s in scores if s.client_id not in accepted]
    return FilterDecision([s.client_id for s in benign], blocked, delta, lam)


def trust_propagate(scores: List[ClientScore], lam: float) -> FilterDecision:
    """Acepta el cliente de menor ε y avanza mientras el salto entre consecutivos sea <= δ."""
    validate_unit_interval(lam, "lambda")
    if not scores:
        raise ValidationException("scores", "se necesita al menos una puntuación")

    ordered = sorted(scores, key=lambda s: (s.epsilon, s.client_id))
    eps = [s.epsilon for s in ordered]
    delta = lam * (eps[-1] - eps[0])

    benign = [ordered[0]]
    for i in range(len(ordered) - 1):
        if eps[i + 1] - eps[i] > delta:
            break
        benign.append(ordered[i + 1])
    return _decide(scores, benign, delta, lam)


def filter_mean_threshold(scores: List[ClientScore]) -> FilterDecision:
    """Acepta ε < media; si ninguno cumple (todos iguales), acepta todos."""
    if not scores:
        raise ValidationException("scores", "se necesita al menos una puntuación")
    mean = float(np.mean([s.epsilon for s in scores]))
    benign = [s for s in scores if s.epsilon < mean] or list(scores)
    benign.sort(key=lambda s: (s.epsilon, s.client_id))
    return _decide(scores, benign, None, None)


# =============================================================================
# AGGREGATION
# =============================================================================

def aggregate_fedavg(models: Sequence[WeightVector], dataset_sizes: Sequence[int]) -> WeightVector:
    """Media ponderada por tamaño de dataset, sumando en el orden recibido."""
    ensure_same_length(models)
    if len(dataset_sizes) != len(models):
        raise ValidationException("dataset_sizes", "uno por modelo")
    if any(size <= 0 for size in dataset_sizes):
        raise ValidationException("dataset_sizes", "deben ser > 0")
    if len(models) == 1:
        return models[0].copy()
    total = np.zeros(len(models[0]))
    for model, size in zip(models, dataset_sizes):
        total += float(size) * model.values
    return WeightVector(total / float(sum(dataset_sizes)))


def aggregate_geomed(
    models: Sequence[WeightVector],
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> WeightVector:
    """Mediana geométrica de los vectores de pesos."""
    ensure_same_length(models)
    result = geometric_median(np.stack([m.values for m in models]), tol=tol, max_iters=max_iters)
    return WeightVector(result.median)


# =============================================================================
# STRATEGIES
# =============================================================================

def _sorted_updates(updates: Sequence[ClientUpdate]) -> List[ClientUpdate]:
    if not updates:
        raise ValidationException("updates", "la ronda no tiene clientes")
    return sorted(updates, key=lambda u: u.client_id)


def _fedavg_accepted(updates: List[ClientUpdate], decision: FilterDecision) -> WeightVector:
    accepted = set(decision.benign_ids)
    chosen = [u for u in updates if u.client_id in accepted]
    return aggregate_fedavg([u.weights for u in chosen], [u.num_samples for u in chosen])


class DefenseStrategy(ABC):
    """Estrategia del servidor: filtra modelos locales y produce el nuevo modelo global."""

    name = "base"

    @abstractmethod
    def apply(self, updates: Sequence[ClientUpdate]) -> DefenseOutcome:
        pass


class NoDefense(DefenseStrategy):
    name = "none"

    def apply(self, updates: Sequence[ClientUpdate]) -> DefenseOutcome:
        updates = _sorted_updates(updates)
        decision = FilterDecision.accept_all([u.client_id for u in updates])
        return DefenseOutcome(decision, _fedavg_accepted(updates, decision))


class GeoMedAggregationDefense(DefenseStrategy):
    """Sin filtrado; el modelo global es la mediana geométrica de los modelos locales."""

    name = "geomed_agg"

    def __init__(self, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS):
        self.tol = tol
        self.max_iters = max_iters

    def apply(self, updates: Sequence[ClientUpdate]) -> DefenseOutcome:
        updates = _sorted_updates(updates)
        decision = FilterDecision.accept_all([u.client_id for u in updates])
        result = geometric_median(np.stack([u.weights.values for u in updates]), tol=self.tol, max_iters=self.max_iters)
        warnings = []
        if not result.converged:
            warnings.append(f"geomed_aggregation_not_converged after {result.iterations} iterations")
        return DefenseOutcome(decision, WeightVector(result.median), warnings=warnings)


class _ScoringDefense(DefenseStrategy):
    """Base de las defensas que puntúan clientes con el CVAE."""

    def __init__(
        self,
        spec: ModelSpec,
        trigger: TriggerSet,
        cvae: CvaeState,
        layer_mask: Optional[Sequence[int]] = None,
        geomed_tol: float = DEFAULT_TOL,
        geomed_max_iters: int = DEFAULT_MAX_ITERS,
    ):
        self.spec = spec
        self.trigger = trigger
        self.cvae = cvae
        self.layer_mask = layer_mask
        self.geomed_tol = geomed_tol
        self.geomed_max_iters = geomed_max_iters

    @abstractmethod
    def decide(self, scores: List[ClientScore]) -> FilterDecision:
        pass

    def apply(self, updates: Sequence[ClientUpdate]) -> DefenseOutcome:
        updates = _sorted_updates(updates)
        warnings = []
        if len(updates) == 1:
            # sin población no hay GeoMed entre clientes
            decision = FilterDecision.accept_all([updates[0].client_id])
            warnings.append("single_client_round_not_scored")
            return DefenseOutcome(decision, updates[0].weights.copy(), warnings=warnings)

        scores, failures = score_clients_detailed(
            [u.weights for u in updates], self.spec, self.trigger, self.layer_mask, self.cvae,
            client_ids=[u.client_id for u in updates],
            geomed_tol=self.geomed_tol, geomed_max_iters=self.geomed_max_iters,
        )
        if failures:
            logger.warning(f"GeoMed did not converge for {failures} of {self.trigger.size} trigger samples")
            warnings.append(f"geomed_not_converged:{failures}")
        decision = self.decide(scores)
        logger.debug(f"{self.name}: delta={decision.delta} blocked={decision.blocked_ids}")
        return DefenseOutcome(decision, _fedavg_accepted(updates, decision), scores, warnings)


class FLCleanerDefense(_ScoringDefense):
    name = "fl_cleaner"

    def __init__(self, *args, lam: float = 0.3, **kwargs):
        super().__init__(*args, **kwargs)
        self.lam = validate_unit_interval(lam, "lambda")

    def decide(self, scores: List[ClientScore]) -> FilterDecision:
        return trust_propagate(scores, self.lam)


class MeanThresholdDefense(_ScoringDefense):
    name = "mean_threshold"

    def decide(self, scores: List[ClientScore]) -> FilterDecision:
        return filter_mean_threshold(scores)


def build_defense(
    config: DefenseConfig,
    spec: ModelSpec,
    trigger: Optional[TriggerSet] = None,
    cvae: Optional[CvaeState] = None,
    layer_mask: Optional[Sequence[int]] = None,
) -> DefenseStrategy:
    """Construir la estrategia indicada en la configuración."""
    if config.kind == "none":
        return NoDefense()
    if config.kind == "geomed_agg":
        return GeoMedAggregationDefense(config.geomed_tol, config.geomed_max_iters)
    if trigger is None or cvae is None:
        raise ValidationException("defense", f"'{config.kind}' necesita trigger set y CVAE")
    common = dict(
        layer_mask=layer_mask, geomed_tol=config.geomed_tol, geomed_max_iters=config.geomed_max_iters,
    )
    if config.kind == "mean_threshold":
        return MeanThresholdDefense(spec, trigger, cvae, **common)
    return FLCleanerDefense(spec, trigger, cvae, lam=config.lam, **common)
