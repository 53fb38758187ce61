import json

import pytest
from pydantic import ValidationError

from flcleaner.repositories.report_repository import ROUND_COLUMNS, ReportRepository, emit_reports, run_id
from flcleaner.schemas.report import RoundReport
from flcleaner.utils.exceptions import ReportWriteException


def make_reports(rounds=5, asr=None):
    reports = []
    for t in range(1, rounds + 1):
        reports.append(RoundReport(
            round=t,
            acc=0.5 + 0.05 * t,
            recall=1.0,
            fpr=0.0 if t % 2 else 0.25,
            asr=asr,
            selected_ids=[0, 2, 5, 7],
            attacker_ids=[5],
            benign_ids=[0, 2, 7],
            blocked_ids=[5],
            epsilons={0: 0.011, 2: 0.012, 5: 0.4, 7: 0.013},
            delta=0.1167,
            lam=0.3,
            wall_ms=12.5 * t,
            warnings=["geomed_not_converged:3"] if t == 2 else [],
        ))
    return reports


def test_rounds_csv_has_one_row_per_round():
    text = ReportRepository().rounds_csv(make_reports())
    lines = text.splitlines()
    assert len(lines) == 6
    assert lines[0] == ",".join(ROUND_COLUMNS)
    assert lines[1].startswith("1,0.550000,1.000000,0.000000,,")
    assert lines[1].endswith(",5")


def test_client_scores_csv_lists_selected_clients():
    lines = ReportRepository().client_scores_csv(make_reports(rounds=1)).splitlines()
    assert lines[0] == "round,client_id,role,epsilon,accepted"
    assert lines[3] == "1,5,malicious,0.4,0"
    assert len(lines) == 5


def test_summary_flags_rounds(config_factory):
    reports = make_reports()
    reports[0] = reports[0].model_copy(update={"flags": ["no_attackers"]})
    summary = ReportRepository().summary(reports, config_factory())
    assert summary.rounds == 5
    assert summary.flagged_rounds == {"geomed_not_converged": [2], "no_attackers": [1]}
    assert summary.final.acc == pytest.approx(0.75)
    assert summary.mean.asr is None


def test_summary_json_excludes_wall_time(config_factory):
    text = ReportRepository().summary_json(make_reports(), config_factory())
    assert "wall_ms" not in text
    data = json.loads(text)
    assert data["attack"]["kind"] == "sign_flip"
    assert data["config"]["defense"]["lambda"] == 0.3


def test_emitted_reports_are_byte_identical(tmp_path, config_factory):
    cfg = config_factory()
    reports = make_reports(asr=0.2)
    emit_reports(reports, tmp_path / "a", cfg)
    emit_reports(reports, tmp_path / "b", cfg)
    for name in ("rounds.csv", "client_scores.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    plots = sorted(p.name for p in (tmp_path / "a" / "plots").iterdir())
    assert plots == ["acc.svg", "asr.svg", "fpr.svg", "recall.svg"]


def test_asr_plot_is_skipped_without_backdoor(tmp_path, config_factory):
    written = emit_reports(make_reports(), tmp_path, config_factory())
    assert not (tmp_path / "plots" / "asr.svg").exists()
    assert (tmp_path / "plots" / "acc.svg") in written


def test_no_plots_writes_only_tables(tmp_path, config_factory):
    written = emit_reports(make_reports(), tmp_path, config_factory(), plots=False)
    assert sorted(p.name for p in written) == ["client_scores.csv", "rounds.csv", "summary.json"]


def test_round_report_rejects_overlapping_decision():
    with pytest.raises(ValidationError):
        RoundReport(round=1, acc=0.5, recall=1.0, fpr=0.0, selected_ids=[0, 1], benign_ids=[0, 1], blocked_ids=[1])
    with pytest.raises(ValidationError):
        RoundReport(round=1, acc=0.5, recall=1.0, fpr=0.0, selected_ids=[0, 1], benign_ids=[0], blocked_ids=[])


def test_run_id_follows_the_config(config_factory):
    assert run_id(config_factory()) == run_id(config_factory())
    assert run_id(config_factory()) != run_id(config_factory(rounds=4))
    assert len(run_id(config_factory())) == 12


def test_load_reads_rounds_back(tmp_path):
    repository = ReportRepository()
    path = repository.save(make_reports(rounds=2), tmp_path / "rounds.csv")
    rows = repository.load(path)
    assert [row["round"] for row in rows] == ["1", "2"]
    assert rows[0]["asr"] == ""
    assert rows[1]["blocked_ids"] == "5"


def test_unwritable_output_raises(tmp_path, config_factory):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportWriteException):
        emit_reports(make_reports(), blocker / "out", config_factory(), plots=False)
