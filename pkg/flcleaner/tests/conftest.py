import os

os.environ.setdefault("FLCLEANER_ENVIRONMENT", "testing")

import numpy as np
import pytest

from flcleaner.core.config import settings
from flcleaner.schemas.experiment import ExperimentConfig
from flcleaner.schemas.model_spec import mlp_spec
from flcleaner.services.datasets import make_synthetic_dataset


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    """Los tests corren en un solo hilo salvo que indiquen lo contrario."""
    monkeypatch.setattr(settings, "THREADS", 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synthetic_train():
    return make_synthetic_dataset(400, num_classes=4, image_size=6, noise=0.1, seed=1)


@pytest.fixture(scope="session")
def synthetic_test():
    return make_synthetic_dataset(200, num_classes=4, image_size=6, noise=0.1, seed=2)


@pytest.fixture
def small_spec():
    return mlp_spec((1, 6, 6), hidden=12, num_classes=4, seed=3)


def make_config(**overrides) -> ExperimentConfig:
    """Experimento sintético pequeño (segundos) con los valores por defecto sobrescribibles."""
    data = {
        "dataset": "synthetic",
        "train_limit": None,
        "test_limit": None,
        "synthetic": {"train_samples": 600, "test_samples": 300, "image_size": 6, "num_classes": 4, "noise": 0.1},
        "num_clients": 8,
        "participation": 0.75,
        "attacker_fraction": 0.25,
        "rounds": 3,
        "trigger_size": 60,
        "partition": {"scheme": "dirichlet", "alpha": 1.0},
        "model": {"preset": "mlp", "hidden": 16},
        "training": {"epochs": 1, "lr": 0.1, "batch_size": 16},
        "cvae": {
            "warmup_epochs": 2, "harvest_epochs": 3, "epochs": 10,
            "latent_dim": 4, "hidden_dim": 24, "lr": 0.05, "batch_size": 32,
            "beta": {"initial": 0.0, "increment": 0.5, "step_epoch": 5},
        },
        "defense": {"kind": "fl_cleaner", "lambda": 0.3},
        "attack": {"kind": "sign_flip", "xi": 1.0},
        "seeds": {"data": 0, "init": 1, "selection": 2, "attack": 3},
    }
    data.update(overrides)
    return ExperimentConfig.model_validate(data)


@pytest.fixture
def config_factory():
    return make_config
