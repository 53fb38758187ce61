import json

import pytest
from click.testing import CliRunner

from flcleaner import __version__
from flcleaner.main import cli
from flcleaner.repositories.checkpoint_repository import CvaeCheckpointRepository, WeightCheckpointRepository

EXPERIMENT_TOML = """
dataset = "synthetic"
num_clients = 6
participation = 1.0
attacker_fraction = 0.2
rounds = 2
trigger_size = 40

[synthetic]
train_samples = 300
test_samples = 120
image_size = 6
num_classes = 4

[model]
preset = "mlp"
hidden = 8

[training]
epochs = 1
batch_size = 16

[cvae]
warmup_epochs = 1
harvest_epochs = 2
epochs = 4
latent_dim = 3
hidden_dim = 16

[defense]
kind = "fl_cleaner"
lambda = 0.3

[attack]
kind = "sign_flip"
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(EXPERIMENT_TOML, encoding="utf-8")
    return path


def last_line(output: str) -> str:
    return output.strip().splitlines()[-1]


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_trust_oracle_command(runner):
    result = runner.invoke(cli, ["oracle", "trust", "--instances", "20"])
    assert result.exit_code == 0
    assert json.loads(last_line(result.output)) == {"failures": 0, "instances": 20, "oracle": "trust"}


def test_geomed_oracle_command(runner):
    result = runner.invoke(cli, ["oracle", "geomed", "--instances", "2", "--seed", "3"])
    assert result.exit_code == 0
    assert json.loads(last_line(result.output))["failures"] == 0


def test_missing_config_exits_with_config_code(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--config", str(tmp_path / "nope.toml")])
    assert result.exit_code == 2


def test_bad_key_exits_with_config_code(runner, tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(EXPERIMENT_TOML + "\nunknown_key = 1\n", encoding="utf-8")
    result = runner.invoke(cli, ["partition", "--config", str(path), "--inspect"])
    assert result.exit_code == 2


def test_odd_pattern_size_exits_with_config_code(runner, tmp_path):
    path = tmp_path / "odd.toml"
    path.write_text(EXPERIMENT_TOML.replace('kind = "sign_flip"', 'kind = "dba"\npattern_size = 5'), encoding="utf-8")
    result = runner.invoke(cli, ["run", "--config", str(path), "--out", str(tmp_path / "run"), "--no-plots"])
    assert result.exit_code == 2


def test_partition_inspect_prints_every_client(runner, config_file):
    result = runner.invoke(cli, ["partition", "--config", str(config_file), "--inspect"])
    assert result.exit_code == 0
    assignments = json.loads(last_line(result.output))
    assert sorted(assignments, key=int) == [str(c) for c in range(6)]
    assert sum(len(v) for v in assignments.values()) == 300


def test_partition_out_writes_json(runner, config_file, tmp_path):
    out = tmp_path / "partition.json"
    result = runner.invoke(cli, ["partition", "--config", str(config_file), "--out", str(out)])
    assert result.exit_code == 0
    assert len(json.loads(out.read_text())) == 6


def test_run_writes_reports(runner, config_file, tmp_path):
    out = tmp_path / "run"
    result = runner.invoke(cli, ["run", "--config", str(config_file), "--out", str(out), "--no-plots"])
    assert result.exit_code == 0, result.output
    assert last_line(result.output) == str(out)
    assert len((out / "rounds.csv").read_text().splitlines()) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["rounds"] == 2
    assert not (out / "plots").exists()


def test_run_checkpoints_load_back(runner, config_file, tmp_path):
    out = tmp_path / "ckpt"
    result = runner.invoke(cli, ["run", "--config", str(config_file), "--out", str(out), "--no-plots", "--checkpoints"])
    assert result.exit_code == 0, result.output
    weights = WeightCheckpointRepository().load(out / "global.bin")
    cvae = CvaeCheckpointRepository().load(out / "cvae.ckpt")
    assert len(weights) == 36 * 8 + 8 + 8 * 4 + 4
    assert cvae.input_dim == 12
