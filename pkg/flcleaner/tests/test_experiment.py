import numpy as np
import pytest

from flcleaner.repositories.report_repository import ReportRepository
from flcleaner.services.defense import aggregate_fedavg
from flcleaner.services.experiment import (
    ExperimentService, attacker_count, build_clients, build_partition, load_data,
    run_experiment, select_clients,
)
from flcleaner.services.network import train_local
from flcleaner.utils.exceptions import ConfigException, ExperimentAbortedException
from flcleaner.utils.helpers import derive_seed


def assert_conserved(reports):
    for report in reports:
        assert sorted(report.benign_ids + report.blocked_ids) == report.selected_ids
        assert set(report.attacker_ids) <= set(report.selected_ids)


# =============================================================================
# SETUP
# =============================================================================

def test_selection_size_and_order(config_factory):
    cfg = config_factory()
    selected = select_clients(cfg, 1)
    assert len(selected) == 6
    assert selected == sorted(set(selected))
    assert select_clients(cfg, 1) == selected
    assert len(select_clients(config_factory(num_clients=10, participation=0.3), 4)) == 3


def test_attacker_count_stays_below_half(config_factory):
    assert attacker_count(config_factory()) == 2
    assert attacker_count(config_factory(num_clients=4, attacker_fraction=0.49)) == 1
    assert attacker_count(config_factory(attacker_fraction=0.0, attack=None)) == 0


def test_partition_covers_training_set(config_factory):
    cfg = config_factory()
    train, _ = load_data(cfg)
    partition = build_partition(cfg, train)
    indices = sorted(i for client in partition.assignments.values() for i in client)
    assert indices == list(range(len(train)))
    clients = build_clients(cfg, partition)
    assert sum(record.is_malicious for record in clients.values()) == 2
    assert sorted(r.attacker_index for r in clients.values() if r.is_malicious) == [0, 1]


def test_inverse_law_partition_from_config(config_factory):
    cfg = config_factory(num_clients=4, partition={"scheme": "inverse_law", "alpha": 60, "gamma": 5, "r": 2})
    train, _ = load_data(cfg)
    assert build_partition(cfg, train).sizes() == [35, 25, 20, 17]


# =============================================================================
# ROUND LOOP
# =============================================================================

def test_runs_are_bit_deterministic(config_factory):
    repository = ReportRepository()
    first = run_experiment(config_factory())
    second = run_experiment(config_factory())
    assert repository.rounds_csv(first) == repository.rounds_csv(second)
    assert repository.client_scores_csv(first) == repository.client_scores_csv(second)
    assert_conserved(first)
    assert [r.round for r in first] == [1, 2, 3]


def test_fl_cleaner_scores_every_selected_client(config_factory):
    reports = run_experiment(config_factory(rounds=2))
    for report in reports:
        assert sorted(report.epsilons) == report.selected_ids
        assert report.lam == 0.3
        assert report.delta is not None and report.delta >= 0
        assert report.asr is None


def test_sign_flip_attackers_score_above_every_benign_client(config_factory):
    reports = run_experiment(config_factory(rounds=4))
    attacked = [r for r in reports if r.attacker_ids]
    assert attacked
    for report in attacked:
        benign = [report.epsilons[cid] for cid in report.selected_ids if cid not in report.attacker_ids]
        assert report.recall == 1.0
        assert min(report.epsilons[cid] for cid in report.attacker_ids) > max(benign)
        assert report.attack == {"kind": "sign_flip", "seed": 0, "xi": 1.0}


def test_no_defense_without_attackers_is_plain_fedavg(config_factory):
    cfg = config_factory(rounds=1, attacker_fraction=0.0, attack=None, defense={"kind": "none"})
    service = ExperimentService(cfg)
    service.prepare()
    initial = service.global_weights
    report = service.run_round(1)

    selected = select_clients(cfg, 1)
    models, sizes = [], []
    for cid in selected:
        data = service.train.subset(service.partition[cid])
        models.append(train_local(initial, service.spec, data, 1, 0.1, 16, seed=derive_seed(cfg.seeds.data, 1, cid)))
        sizes.append(len(data))
    assert service.global_weights == aggregate_fedavg(models, sizes)
    assert report.recall == 1.0
    assert report.flags == ["no_attackers"]
    assert report.blocked_ids == []


def test_zero_attackers_under_fl_cleaner_reports_full_recall(config_factory):
    reports = run_experiment(config_factory(rounds=1, attacker_fraction=0.0, attack=None))
    assert reports[0].recall == 1.0
    assert reports[0].attacker_ids == []
    assert reports[0].attack is None
    assert 0.0 <= reports[0].fpr <= 1.0


@pytest.mark.parametrize("kind", ["mean_threshold", "geomed_agg", "none"])
def test_every_defense_completes(config_factory, kind):
    reports = run_experiment(config_factory(rounds=2, defense={"kind": kind}))
    assert_conserved(reports)
    if kind in ("geomed_agg", "none"):
        assert all(r.blocked_ids == [] and r.epsilons == {} for r in reports)


@pytest.mark.parametrize("attack", [
    {"kind": "dba", "pattern_size": 2, "poison_rate": 0.5},
    {"kind": "neurotoxin", "pattern_size": 2, "k_percent": 90},
])
def test_backdoor_runs_report_attack_success(config_factory, attack):
    reports = run_experiment(config_factory(rounds=2, attack=attack, defense={"kind": "none"}))
    assert all(r.asr is not None and 0.0 <= r.asr <= 1.0 for r in reports)


def test_undefended_noise_attack_hurts_accuracy(config_factory):
    clean = run_experiment(config_factory(rounds=3, attacker_fraction=0.0, attack=None, defense={"kind": "none"}))
    noisy = run_experiment(config_factory(rounds=3, attack={"kind": "additive_noise", "sigma": 10.0, "fraction": 1.0},
                                         attacker_fraction=0.375, defense={"kind": "none"}))
    assert noisy[-1].acc < clean[-1].acc


# =============================================================================
# FAILURES
# =============================================================================

def test_setup_error_aborts_at_round_zero(config_factory):
    with pytest.raises(ExperimentAbortedException) as exc:
        run_experiment(config_factory(trigger_size=10_000))
    assert exc.value.round_number == 0


def test_missing_dataset_is_a_config_error(config_factory, tmp_path):
    cfg = config_factory(dataset="mnist")
    with pytest.raises(ConfigException) as exc:
        run_experiment(cfg, data_dir=tmp_path)
    assert exc.value.exit_code == 2


def test_full_scale_variant(config_factory):
    cfg = config_factory().full_scale()
    assert (cfg.num_clients, cfg.rounds, cfg.train_limit, cfg.test_limit) == (100, 50, None, None)
    assert np.isclose(cfg.attacker_fraction, 0.25)
