import numpy as np
import pytest

from flcleaner.models.weights import WeightVector
from flcleaner.schemas.experiment import (
    AdditiveNoiseAttack, DbaAttack, NeurotoxinAttack, SameValueAttack,
    ScalingAttack, SignFlipAttack, TrainingConfig,
)
from flcleaner.schemas.model_spec import mlp_spec
from flcleaner.services.attacks import (
    BackdoorController, ByzantineController, apply_byzantine, backdoor_pattern,
    build_attack_controller, neurotoxin_mask, run_backdoor_client,
)
from flcleaner.services.datasets import backdoor_test_set
from flcleaner.services.metrics import attack_success_rate
from flcleaner.services.network import init_model, train_local
from flcleaner.utils.exceptions import ValidationException


@pytest.fixture
def training():
    return TrainingConfig(epochs=2, lr=0.1, batch_size=16)


# =============================================================================
# BYZANTINE
# =============================================================================

def test_sign_flip():
    assert apply_byzantine(WeightVector([0.5, -0.3]), SignFlipAttack(xi=1.0)).values.tolist() == [-0.5, 0.3]


def test_same_value():
    assert apply_byzantine(WeightVector(np.arange(4.0)), SameValueAttack(c=0.01)).values.tolist() == [0.01] * 4


def test_scaling():
    assert apply_byzantine(WeightVector([0.1]), ScalingAttack(a=10.0)).values.tolist() == [1.0]


def test_vanishing_noise_leaves_weights_unchanged(rng):
    weights = WeightVector(rng.normal(size=50))
    noisy = apply_byzantine(weights, AdditiveNoiseAttack(sigma=1e-12, seed=4))
    assert np.max(np.abs(noisy.values - weights.values)) < 1e-9


def test_noise_touches_a_seeded_fraction_of_coordinates():
    weights = WeightVector(np.zeros(10))
    spec = AdditiveNoiseAttack(sigma=1.0, fraction=0.5, seed=7)
    noisy = apply_byzantine(weights, spec)
    assert np.count_nonzero(noisy.values) == 5
    assert apply_byzantine(weights, spec) == noisy
    assert apply_byzantine(weights, spec.model_copy(update={"seed": 8})) != noisy


def test_backdoor_kind_is_not_byzantine():
    with pytest.raises(ValidationException):
        apply_byzantine(WeightVector([1.0]), DbaAttack())


# =============================================================================
# BACKDOOR
# =============================================================================

def test_neurotoxin_mask_freezes_top_magnitudes():
    assert neurotoxin_mask(np.array([5.0, 1.0, 2.0, 3.0, 4.0]), 80).tolist() == [0.0, 1.0, 1.0, 1.0, 1.0]
    assert neurotoxin_mask(np.array([-5.0, 1.0, -2.0, 3.0, 4.0]), 40).tolist() == [0.0, 1.0, 1.0, 0.0, 0.0]


def test_dba_quarter_follows_attacker_index():
    assert backdoor_pattern(DbaAttack(), attacker_index=5).part_index == 1
    assert backdoor_pattern(DbaAttack(part_index=3), attacker_index=5).part_index == 3
    assert backdoor_pattern(NeurotoxinAttack()).part_index is None


def test_dba_without_poison_matches_benign_client(synthetic_train, small_spec, training):
    weights = init_model(small_spec)
    benign = train_local(weights, small_spec, synthetic_train, training.epochs, training.lr, training.batch_size, seed=11)
    attack = DbaAttack(pattern_size=2, poison_rate=0.0)
    assert run_backdoor_client(weights, small_spec, synthetic_train, attack, training, seed=11) == benign


def test_neurotoxin_never_moves_frozen_coordinates(synthetic_train, small_spec, training):
    weights = init_model(small_spec)
    attack = NeurotoxinAttack(pattern_size=2, k_percent=60)
    out = run_backdoor_client(weights, small_spec, synthetic_train, attack, training, seed=3)
    changed = out.values != weights.values
    # al menos el 40 % de mayor gradiente queda congelado
    assert np.count_nonzero(~changed) >= round(0.4 * len(weights))


def test_poisoned_training_raises_attack_success(synthetic_train, synthetic_test):
    spec = mlp_spec((1, 6, 6), hidden=16, num_classes=4, seed=0)
    training = TrainingConfig(epochs=5, lr=0.1, batch_size=16)
    attack = DbaAttack(pattern_size=4, part_index=None, poison_rate=0.5, target_class=0)
    weights = init_model(spec)
    # DBA sin part_index: el cuarto lo fija attacker_index
    pattern = backdoor_pattern(attack, attacker_index=0)
    backdoor = backdoor_test_set(synthetic_test, pattern)
    clean = train_local(weights, spec, synthetic_train, training.epochs, training.lr, training.batch_size, seed=1)
    poisoned = run_backdoor_client(weights, spec, synthetic_train, attack, training, seed=1)
    assert attack_success_rate(poisoned, spec, backdoor) > attack_success_rate(clean, spec, backdoor)


# =============================================================================
# CONTROLLERS
# =============================================================================

def test_controllers_dispatch_on_attack_family():
    assert isinstance(build_attack_controller(SignFlipAttack()), ByzantineController)
    assert isinstance(build_attack_controller(NeurotoxinAttack()), BackdoorController)


def test_byzantine_controller_trains_then_transforms(synthetic_train, small_spec, training):
    weights = init_model(small_spec)
    controller = ByzantineController(SignFlipAttack(xi=2.0))
    out = controller.run(weights, small_spec, synthetic_train, training, seed=6, attack_seed=1)
    honest = train_local(weights, small_spec, synthetic_train, training.epochs, training.lr, training.batch_size, seed=6)
    assert np.array_equal(out.values, -2.0 * honest.values)
