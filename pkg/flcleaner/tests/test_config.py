from pathlib import Path

import pytest

from flcleaner.core.config import (
    ProductionSettings, Settings, TestingSettings, load_experiment_config, parse_experiment_config,
)
from flcleaner.schemas.experiment import InverseLawPartitionConfig, NeurotoxinAttack
from flcleaner.utils.exceptions import ConfigException

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"

SMALL_TOML = """
dataset = "synthetic"
num_clients = 6
rounds = 2
attacker_fraction = 0.3

[defense]
kind = "fl_cleaner"
lambda = 0.25

[attack]
kind = "sign_flip"
xi = 2.0
"""


def write(tmp_path, text, name="exp.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# =============================================================================
# EXPERIMENT FILES
# =============================================================================

def test_lambda_key_maps_to_lam(tmp_path):
    cfg = load_experiment_config(write(tmp_path, SMALL_TOML))
    assert cfg.defense.lam == 0.25
    assert cfg.attack.xi == 2.0
    assert cfg.num_clients == 6


def test_unknown_key_is_a_config_error(tmp_path):
    with pytest.raises(ConfigException) as exc:
        load_experiment_config(write(tmp_path, SMALL_TOML + "\nbogus = 1\n"))
    assert exc.value.exit_code == 2
    assert "bogus" in exc.value.detail


def test_attackers_require_an_attack_section():
    with pytest.raises(ConfigException):
        parse_experiment_config({"dataset": "synthetic", "attacker_fraction": 0.2})


def test_attacker_fraction_must_stay_below_half():
    with pytest.raises(ConfigException):
        parse_experiment_config({"attacker_fraction": 0.5, "attack": {"kind": "sign_flip"}})


def test_invalid_toml_and_missing_file(tmp_path):
    with pytest.raises(ConfigException) as exc:
        load_experiment_config(write(tmp_path, "rounds = = 3"))
    assert exc.value.exit_code == 2
    with pytest.raises(ConfigException):
        load_experiment_config(tmp_path / "missing.toml")


def test_partition_and_attack_sections_are_discriminated():
    cfg = parse_experiment_config({
        "partition": {"scheme": "inverse_law", "alpha": 500, "gamma": 10},
        "attack": {"kind": "neurotoxin", "k_percent": 90},
    })
    assert isinstance(cfg.partition, InverseLawPartitionConfig)
    assert cfg.partition.r == 2
    assert isinstance(cfg.attack, NeurotoxinAttack)
    assert cfg.is_backdoor_run


def test_odd_pattern_size_is_a_config_error(tmp_path):
    with pytest.raises(ConfigException) as exc:
        parse_experiment_config({"attack": {"kind": "dba", "pattern_size": 5}})
    assert exc.value.exit_code == 2
    assert "pattern_size" in exc.value.detail
    with pytest.raises(ConfigException):
        load_experiment_config(write(tmp_path, SMALL_TOML.replace("sign_flip\"\nxi = 2.0", "neurotoxin\"\npattern_size = 3")))


def test_no_attack_run_is_valid():
    cfg = parse_experiment_config({"attacker_fraction": 0.0})
    assert cfg.attack is None
    assert not cfg.is_backdoor_run


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.toml")), ids=lambda p: p.name)
def test_shipped_configs_load(path):
    cfg = load_experiment_config(path)
    assert cfg.rounds >= 1


def test_shipped_configs_exist():
    assert len(list(CONFIG_DIR.glob("*.toml"))) >= 8


# =============================================================================
# SETTINGS
# =============================================================================

def test_production_defaults_to_warning():
    assert ProductionSettings().LOG_LEVEL == "WARNING"


def test_testing_settings_run_single_threaded():
    testing = TestingSettings()
    assert testing.is_testing
    assert testing.max_workers == 1


def test_threads_env_parsing(monkeypatch):
    monkeypatch.setenv("FLCLEANER_THREADS", "")
    assert Settings().THREADS is None
    monkeypatch.setenv("FLCLEANER_THREADS", "3")
    assert Settings().max_workers == 3
    monkeypatch.setenv("FLCLEANER_THREADS", "0")
    with pytest.raises(ValueError):
        Settings()


def test_log_level_is_normalized(monkeypatch):
    monkeypatch.setenv("FLCLEANER_LOG_LEVEL", "debug")
    assert Settings().LOG_LEVEL == "DEBUG"
