from typing import Annotated, List, Literal, Optional, Tuple, Union
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from flcleaner.schemas.model_spec import LayerSpec, ModelSpec, cnn_spec, mlp_spec


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# =============================================================================
# PARTITIONS
# =============================================================================

class DirichletPartitionConfig(_Section):
    scheme: Literal["dirichlet"] = "dirichlet"
    alpha: float = Field(1.0, gt=0)


class InverseLawPartitionConfig(_Section):
    scheme: Literal["inverse_law"] = "inverse_law"
    alpha: float = Field(2000.0, gt=0)
    gamma: int = Field(20, ge=0)
    r: int = Field(2, ge=1)


PartitionConfig = Annotated[
    Union[DirichletPartitionConfig, InverseLawPartitionConfig],
    Field(discriminator="scheme"),
]


# =============================================================================
# MODEL / TRAINING
# =============================================================================

class ModelConfig(_Section):
    preset: Literal["mlp", "cnn", "custom"] = "mlp"
    hidden: int = Field(128, ge=1)
    layers: Optional[List[LayerSpec]] = None

    @model_validator(mode="after")
    def check_custom_layers(self):
        if self.preset == "custom" and not self.layers:
            raise ValueError("preset 'custom' requiere 'layers'")
        return self

    def build(self, input_shape: Tuple[int, int, int], num_classes: int, seed: int) -> ModelSpec:
        """Construir el ModelSpec para la forma de entrada del dataset."""
        if self.preset == "mlp":
            return mlp_spec(input_shape, self.hidden, num_classes, seed)
        if self.preset == "cnn":
            return cnn_spec(input_shape, num_classes, seed)
        return ModelSpec(layers=self.layers, input_shape=input_shape, seed=seed)


class TrainingConfig(_Section):
    epochs: int = Field(2, ge=1)
    lr: float = Field(0.05, gt=0)
    batch_size: int = Field(32, ge=1)


# =============================================================================
# CVAE / DEFENSE
# =============================================================================

class BetaSchedule(_Section):
    initial: float = Field(0.0, ge=0)
    increment: float = Field(0.5, ge=0)
    step_epoch: int = Field(10, ge=1)


class CvaeConfig(_Section):
    warmup_epochs: int = Field(10, ge=0)
    harvest_epochs: int = Field(10, ge=1)
    epochs: int = Field(20, ge=1)
    latent_dim: int = Field(16, ge=1)
    hidden_dim: int = Field(100, ge=1)
    lr: float = Field(1e-2, gt=0)
    batch_size: int = Field(64, ge=1)
    server_lr: Optional[float] = Field(None, gt=0)
    beta: BetaSchedule = BetaSchedule()


class DefenseConfig(_Section):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    kind: Literal["fl_cleaner", "mean_threshold", "geomed_agg", "none"] = "fl_cleaner"
    lam: float = Field(0.3, ge=0, le=1, alias="lambda")
    geomed_tol: float = Field(1e-6, gt=0)
    geomed_max_iters: int = Field(200, ge=1)


# =============================================================================
# ATTACKS
# =============================================================================

class _Attack(_Section):
    seed: int = Field(0, ge=0)

    @property
    def is_byzantine(self) -> bool:
        return self.kind in BYZANTINE_KINDS

    @property
    def is_backdoor(self) -> bool:
        return self.kind in BACKDOOR_KINDS


class SignFlipAttack(_Attack):
    kind: Literal["sign_flip"] = "sign_flip"
    xi: float = Field(1.0, gt=0)


class AdditiveNoiseAttack(_Attack):
    kind: Literal["additive_noise"] = "additive_noise"
    sigma: float = Field(0.1, gt=0)
    fraction: float = Field(1.0, gt=0, le=1)


class SameValueAttack(_Attack):
    kind: Literal["same_value"] = "same_value"
    c: float = 0.01


class ScalingAttack(_Attack):
    kind: Literal["scaling"] = "scaling"
    a: float = Field(10.0, gt=1)


class _BackdoorAttack(_Attack):
    pattern_size: int = Field(10, ge=2)
    origin: Tuple[int, int] = (0, 0)
    target_class: int = Field(0, ge=0)
    # 0 se admite para comparar con un cliente benigno
    poison_rate: float = Field(0.3, ge=0, le=1)

    @field_validator("pattern_size")
    @classmethod
    def check_even_pattern(cls, v: int) -> int:
        if v % 2:
            raise ValueError("pattern_size debe ser par para dividirse en cuatro cuartos")
        return v


class DbaAttack(_BackdoorAttack):
    kind: Literal["dba"] = "dba"
    part_index: Optional[int] = Field(None, ge=0, le=3)


class NeurotoxinAttack(_BackdoorAttack):
    kind: Literal["neurotoxin"] = "neurotoxin"
    k_percent: float = Field(95.0, gt=0, lt=100)


BYZANTINE_KINDS = ("sign_flip", "additive_noise", "same_value", "scaling")
BACKDOOR_KINDS = ("dba", "neurotoxin")

AttackSpec = Annotated[
    Union[SignFlipAttack, AdditiveNoiseAttack, SameValueAttack, ScalingAttack, DbaAttack, NeurotoxinAttack],
    Field(discriminator="kind"),
]


# =============================================================================
# EXPERIMENT
# =============================================================================

class SeedsConfig(_Section):
    data: int = Field(0, ge=0)
    init: int = Field(1, ge=0)
    selection: int = Field(2, ge=0)
    attack: int = Field(3, ge=0)


class SyntheticConfig(_Section):
    train_samples: int = Field(2000, ge=10)
    test_samples: int = Field(600, ge=10)
    image_size: int = Field(8, ge=4)
    num_classes: int = Field(10, ge=2)
    noise: float = Field(0.15, ge=0)


class ExperimentConfig(_Section):
    """Configuración completa de un experimento (fichero TOML validado)."""

    dataset: Literal["mnist", "fashion_mnist", "synthetic"] = "mnist"
    data_dir: Optional[str] = None
    train_limit: Optional[int] = Field(10000, ge=1)
    test_limit: Optional[int] = Field(2000, ge=1)
    synthetic: SyntheticConfig = SyntheticConfig()

    num_clients: int = Field(20, ge=1)
    participation: float = Field(0.5, gt=0, le=1)
    attacker_fraction: float = Field(0.3, ge=0, lt=0.5)
    rounds: int = Field(15, ge=1)
    trigger_size: int = Field(250, ge=1)
    layer_mask: Optional[List[int]] = None

    partition: PartitionConfig = DirichletPartitionConfig()
    model: ModelConfig = ModelConfig()
    training: TrainingConfig = TrainingConfig()
    cvae: CvaeConfig = CvaeConfig()
    defense: DefenseConfig = DefenseConfig()
    attack: Optional[AttackSpec] = None
    seeds: SeedsConfig = SeedsConfig()

    @model_validator(mode="after")
    def check_attackers(self):
        if self.attacker_fraction > 0 and self.attack is None:
            raise ValueError("attacker_fraction > 0 requiere una sección [attack]")
        return self

    @property
    def is_backdoor_run(self) -> bool:
        return self.attack is not None and self.attack.is_backdoor and self.attacker_fraction > 0

    def full_scale(self) -> "ExperimentConfig":
        """Variante a escala completa: 100 clientes, 50 rondas, datasets completos."""
        return self.model_copy(update={
            "num_clients": 100,
            "rounds": 50,
            "train_limit": None,
            "test_limit": None,
        })
