from pathlib import Path
from typing import Dict, List, Optional, Sequence
import csv
import hashlib
import io
import json
import logging

import numpy as np

from flcleaner.repositories.base import BaseRepository, PathLike
from flcleaner.schemas.experiment import ExperimentConfig
from flcleaner.schemas.report import MetricSummary, RoundReport, RunSummary
from flcleaner.utils.exceptions import ReportWriteException, ValidationException

logger = logging.getLogger(__name__)

ROUND_COLUMNS = ["round", "acc", "recall", "fpr", "asr", "delta", "blocked_ids"]
SCORE_COLUMNS = ["round", "client_id", "role", "epsilon", "accepted"]
PLOTTED_METRICS = ("acc", "recall", "fpr", "asr")


def _fmt(value: Optional[float], spec: str = ".6f") -> str:
    return "" if value is None else format(value, spec)


def _csv_text(fieldnames: List[str], rows: List[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def run_id(config: ExperimentConfig) -> str:
    """Identificador estilo git: sha1 de la configuración canónica (12 caracteres)."""
    canonical = json.dumps(config.model_dump(mode="json", by_alias=True), sort_keys=True, separators=(",", ":"))
    return hashlib.sha1(canonical.encode("utf-8")).hexdigest()[:12]


class ReportRepository(BaseRepository[List[RoundReport]]):
    """rounds.csv, client_scores.csv, summary.json y gráficas SVG de una ejecución."""

    def rounds_csv(self, reports: Sequence[RoundReport]) -> str:
        rows = [
            {
                "round": r.round,
                "acc": _fmt(r.acc),
                "recall": _fmt(r.recall),
                "fpr": _fmt(r.fpr),
                "asr": _fmt(r.asr),
                "delta": _fmt(r.delta, ".8g"),
                "blocked_ids": ";".join(str(c) for c in r.blocked_ids),
            }
            for r in reports
        ]
        return _csv_text(ROUND_COLUMNS, rows)

    def client_scores_csv(self, reports: Sequence[RoundReport]) -> str:
        rows = []
        for r in reports:
            attackers = set(r.attacker_ids)
            blocked = set(r.blocked_ids)
            for client_id in r.selected_ids:
                rows.append({
                    "round": r.round,
                    "client_id": client_id,
                    "role": "malicious" if client_id in attackers else "benign",
                    "epsilon": _fmt(r.epsilons.get(client_id), ".8g"),
                    "accepted": int(client_id not in blocked),
                })
        return _csv_text(SCORE_COLUMNS, rows)

    def summary(self, reports: Sequence[RoundReport], config: ExperimentConfig) -> RunSummary:
        if not reports:
            raise ValidationException("reports", "no hay rondas que resumir")
        last = reports[-1]
        asrs = [r.asr for r in reports if r.asr is not None]
        flagged: Dict[str, List[int]] = {}
        for r in reports:
            for flag in r.flags + [w.split(":")[0] for w in r.warnings]:
                flagged.setdefault(flag, []).append(r.round)
        return RunSummary(
            run_id=run_id(config),
            rounds=len(reports),
            final=MetricSummary(acc=last.acc, recall=last.recall, fpr=last.fpr, asr=last.asr),
            mean=MetricSummary(
                acc=float(np.mean([r.acc for r in reports])),
                recall=float(np.mean([r.recall for r in reports])),
                fpr=float(np.mean([r.fpr for r in reports])),
                asr=float(np.mean(asrs)) if asrs else None,
            ),
            flagged_rounds={k: sorted(set(v)) for k, v in sorted(flagged.items())},
            attack=config.attack.model_dump(mode="json") if config.attack is not None else None,
            config=config.model_dump(mode="json", by_alias=True),
        )

    def summary_json(self, reports: Sequence[RoundReport], config: ExperimentConfig) -> str:
        return json.dumps(self.summary(reports, config).model_dump(mode="json"), indent=2, sort_keys=True) + "\n"

    def write_plots(self, reports: Sequence[RoundReport], plots_dir: Path) -> List[Path]:
        """Una gráfica SVG por métrica frente a la ronda."""
        import matplotlib

        matplotlib.use("Agg")
        matplotlib.rcParams.update({"font.family": "DejaVu Sans", "svg.hashsalt": "flcleaner"})
        import matplotlib.pyplot as plt

        try:
            plots_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ReportWriteException(str(plots_dir), e)

        rounds = [r.round for r in reports]
        written = []
        for metric in PLOTTED_METRICS:
            values = [getattr(r, metric) for r in reports]
            if all(v is None for v in values):
                continue
            fig, ax = plt.subplots(figsize=(6, 3.6), constrained_layout=True)
            ax.plot(rounds, [np.nan if v is None else v for v in values], marker="o")
            ax.set_xlabel("Round")
            ax.set_ylabel(metric.upper())
            ax.set_ylim(-0.02, 1.02)
            ax.grid(True, alpha=0.3)
            path = plots_dir / f"{metric}.svg"
            try:
                fig.savefig(path, format="svg", metadata={"Date": None})
            except OSError as e:
                raise ReportWriteException(str(path), e)
            finally:
                plt.close(fig)
            written.append(path)
        return written

    def save(self, entity: List[RoundReport], path: PathLike) -> Path:
        return self.write_text(path, self.rounds_csv(entity))

    def load(self, path: PathLike) -> List[dict]:
        """Filas de un rounds.csv como diccionarios de texto."""
        with Path(path).open(encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f))


def emit_reports(
    reports: Sequence[RoundReport],
    out_dir: PathLike,
    config: ExperimentConfig,
    plots: bool = True,
) -> List[Path]:
    """Escribe todos los artefactos de una ejecución y devuelve sus rutas."""
    out_dir = Path(out_dir)
    repository = ReportRepository()
    written = [
        repository.save(list(reports), out_dir / "rounds.csv"),
        repository.write_text(out_dir / "client_scores.csv", repository.client_scores_csv(reports)),
        repository.write_text(out_dir / "summary.json", repository.summary_json(reports, config)),
    ]
    if plots:
        written.extend(repository.write_plots(reports, out_dir / "plots"))
    logger.info(f"Wrote {len(written)} report files to {out_dir}")
    return written
