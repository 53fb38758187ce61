from abc import ABC, abstractmethod
import logging

import numpy as np

from flcleaner.models.dataset import BackdoorPattern, LabeledDataset
from flcleaner.models.weights import WeightVector
from flcleaner.schemas.experiment import (
    AdditiveNoiseAttack, AttackSpec, DbaAttack, NeurotoxinAttack,
    SameValueAttack, ScalingAttack, SignFlipAttack, TrainingConfig,
)
from flcleaner.schemas.model_spec import ModelSpec
from flcleaner.services.datasets import poison_dataset, square_pattern
from flcleaner.services.network import loss_and_gradient, train_local
from flcleaner.utils.exceptions import ValidationException
from flcleaner.utils.helpers import derive_rng, round_half_up

logger = logging.getLogger(__name__)

# flujo de aleatoriedad del envenenamiento, separado del barajado local
POISON_STREAM = 1


# =============================================================================
# BYZANTINE
# =============================================================================

def apply_byzantine(weights: WeightVector, spec: AttackSpec) -> WeightVector:
    """Transforma el modelo saliente de un cliente bizantino."""
    w = weights.values
    if isinstance(spec, SignFlipAttack):
        return WeightVector(-spec.xi * w)
    if isinstance(spec, AdditiveNoiseAttack):
        rng = derive_rng(spec.seed)
        count = round_half_up(spec.fraction * w.shape[0])
        idx = rng.choice(w.shape[0], size=count, replace=False)
        noisy = w.copy()
        noisy[idx] += rng.normal(0.0, spec.sigma, size=count)
        return WeightVector(noisy)
    if isinstance(spec, SameValueAttack):
        return WeightVector(np.full_like(w, spec.c))
    if isinstance(spec, ScalingAttack):
        return WeightVector(spec.a * w)
    raise ValidationException("attack.kind", f"'{spec.kind}' no es un ataque bizantino")


# =============================================================================
# BACKDOOR
# =============================================================================

def neurotoxin_mask(gradient: np.ndarray, k_percent: float) -> np.ndarray:
    """Máscara 1/0 que deja entrenables las round(k% · dim) coordenadas de menor |gradiente|."""
    if not 0 < k_percent < 100:
        raise ValidationException("k_percent", "debe estar en (0, 100)")
    magnitude = np.abs(np.asarray(gradient, dtype=np.float64))
    dim = magnitude.shape[0]
    trainable = round_half_up(k_percent * dim / 100.0)
    # empates de magnitud: gana el índice más bajo
    order = np.lexsort((np.arange(dim), magnitude))
    mask = np.zeros(dim)
    mask[order[:trainable]] = 1.0
    return mask


def backdoor_pattern(spec: AttackSpec, attacker_index: int = 0) -> BackdoorPattern:
    """Patrón que inyecta un atacante: un cuarto en DBA, el cuadrado completo en Neurotoxin."""
    pattern = square_pattern(spec.pattern_size, spec.origin, spec.target_class)
    if isinstance(spec, DbaAttack):
        part = spec.part_index if spec.part_index is not None else attacker_index % 4
        return pattern.quarter(part)
    return pattern


def run_backdoor_client(
    global_weights: WeightVector,
    model_spec: ModelSpec,
    dataset: LabeledDataset,
    attack: AttackSpec,
    training: TrainingConfig,
    seed: int = 0,
    attacker_index: int = 0,
) -> WeightVector:
    """Entrenamiento local con muestras envenenadas en cada época (y máscara Neurotoxin)."""
    if not attack.is_backdoor:
        raise ValidationException("attack.kind", f"'{attack.kind}' no es un backdoor")
    pattern = backdoor_pattern(attack, attacker_index)

    grad_mask = None
    if isinstance(attack, NeurotoxinAttack):
        _, gradient = loss_and_gradient(global_weights, model_spec, dataset.images, dataset.labels)
        grad_mask = neurotoxin_mask(gradient.values, attack.k_percent)

    weights = global_weights
    for epoch in range(training.epochs):
        poisoned = poison_dataset(dataset, pattern, attack.poison_rate, derive_rng(attack.seed, epoch, POISON_STREAM))
        weights = train_local(
            weights, model_spec, poisoned, 1, training.lr, training.batch_size,
            grad_mask=grad_mask, seed=seed, start_epoch=epoch,
        )
    return weights


# =============================================================================
# CONTROLLERS
# =============================================================================

class AttackController(ABC):
    """Sustituye el entrenamiento local de un cliente comprometido."""

    def __init__(self, attack: AttackSpec):
        self.attack = attack

    @abstractmethod
    def run(
        self,
        global_weights: WeightVector,
        model_spec: ModelSpec,
        dataset: LabeledDataset,
        training: TrainingConfig,
        seed: int,
        attack_seed: int,
        attacker_index: int = 0,
    ) -> WeightVector:
        pass


class ByzantineController(AttackController):
    """Entrena como un cliente honesto y transforma los pesos antes de enviarlos."""

    def run(self, global_weights, model_spec, dataset, training, seed, attack_seed, attacker_index=0):
        trained = train_local(
            global_weights, model_spec, dataset, training.epochs, training.lr, training.batch_size, seed=seed,
        )
        return apply_byzantine(trained, self.attack.model_copy(update={"seed": attack_seed}))


class BackdoorController(AttackController):
    def run(self, global_weights, model_spec, dataset, training, seed, attack_seed, attacker_index=0):
        return run_backdoor_client(
            global_weights, model_spec, dataset, self.attack.model_copy(update={"seed": attack_seed}),
            training, seed=seed, attacker_index=attacker_index,
        )


def build_attack_controller(attack: AttackSpec) -> AttackController:
    if attack.is_byzantine:
        return ByzantineController(attack)
    return BackdoorController(attack)
