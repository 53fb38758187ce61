from typing import Dict, NamedTuple, Optional

from flcleaner.models.client import MALICIOUS
from flcleaner.models.dataset import LabeledDataset
from flcleaner.models.defense import FilterDecision
from flcleaner.models.weights import WeightVector
from flcleaner.schemas.model_spec import ModelSpec
from flcleaner.services.network import evaluate
from flcleaner.utils.exceptions import ValidationException


class RoundMetrics(NamedTuple):
    acc: float
    recall: float
    fpr: float
    asr: Optional[float]
    attackers_present: int
    benign_present: int

    @property
    def no_attackers(self) -> bool:
        return self.attackers_present == 0


def detection_rates(decision: FilterDecision, roles: Dict[int, str]):
    """(recall, fpr, atacantes, benignos); recall = 1.0 si no hay atacantes, fpr = 0.0 si no hay benignos."""
    selected = decision.all_ids
    missing = [c for c in selected if c not in roles]
    if missing:
        raise ValidationException("roles", f"faltan los clientes {missing}")
    blocked = set(decision.blocked_ids)
    attackers = [c for c in selected if roles[c] == MALICIOUS]
    benign = [c for c in selected if roles[c] != MALICIOUS]
    recall = sum(c in blocked for c in attackers) / len(attackers) if attackers else 1.0
    fpr = sum(c in blocked for c in benign) / len(benign) if benign else 0.0
    return recall, fpr, len(attackers), len(benign)


def attack_success_rate(weights: WeightVector, spec: ModelSpec, backdoor_set: LabeledDataset) -> float:
    """Fracción de muestras con disparador clasificadas en la clase objetivo."""
    return evaluate(weights, spec, backdoor_set)


def compute_metrics(
    decision: FilterDecision,
    roles: Dict[int, str],
    weights: WeightVector,
    spec: ModelSpec,
    eval_set: LabeledDataset,
    backdoor_set: Optional[LabeledDataset] = None,
) -> RoundMetrics:
    """ACC sobre el test limpio, Recall/FPR de la decisión y ASR si hay conjunto con disparador."""
    recall, fpr, attackers, benign = detection_rates(decision, roles)
    acc = evaluate(weights, spec, eval_set)
    asr = attack_success_rate(weights, spec, backdoor_set) if backdoor_set is not None else None
    return RoundMetrics(acc, recall, fpr, asr, attackers, benign)
