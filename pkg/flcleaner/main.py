# flcleaner/main.py
from pathlib import Path
from typing import Optional
import json
import logging

import click

from flcleaner import __version__
from flcleaner.core.config import Settings, load_experiment_config, settings
from flcleaner.repositories.checkpoint_repository import save_checkpoints
from flcleaner.repositories.partition_repository import PartitionRepository
from flcleaner.repositories.report_repository import emit_reports, run_id
from flcleaner.services.experiment import ExperimentService, build_partition, load_data
from flcleaner.services.oracles import run_geomed_oracle, run_trust_oracle
from flcleaner.utils.exceptions import handle_cli_errors

logger = logging.getLogger(__name__)


def configure_logging(app_settings: Settings, level: Optional[str] = None) -> None:
    """Configurar logging global a partir de los settings."""
    logging.basicConfig(
        level=(level or app_settings.LOG_LEVEL).upper(),
        format=app_settings.LOG_FORMAT
    )
    # matplotlib es muy verboso en DEBUG
    logging.getLogger("matplotlib").setLevel(logging.WARNING)


@click.group()
@click.version_option(__version__, prog_name=settings.PROJECT_NAME)
@click.option("--log-level", default=None, help="Nivel de log (por defecto FLCLEANER_LOG_LEVEL).")
def cli(log_level: Optional[str]):
    """Simulador de aprendizaje federado con la defensa FL-CLEANER."""
    configure_logging(settings, log_level)


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Fichero TOML del experimento.")
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False), help="Directorio de salida.")
@click.option("--plots/--no-plots", default=True, help="Generar plots/*.svg.")
@click.option("--full-scale", is_flag=True, help="100 clientes, 50 rondas y datasets completos.")
@click.option("--data-dir", default=None, type=click.Path(file_okay=False), help="Raíz con mnist/ y fashion_mnist/.")
@click.option("--checkpoints", is_flag=True, help="Guardar global.bin y cvae.ckpt en el directorio de salida.")
@handle_cli_errors
def run(
    config_path: str,
    out_dir: Optional[str],
    plots: bool,
    full_scale: bool,
    data_dir: Optional[str],
    checkpoints: bool,
):
    """Ejecutar un experimento y escribir rounds.csv, summary.json y gráficas."""
    cfg = load_experiment_config(config_path)
    if full_scale:
        cfg = cfg.full_scale()
    out = Path(out_dir) if out_dir else Path(settings.OUTPUT_DIR) / run_id(cfg)
    service = ExperimentService(cfg, data_dir)
    reports = service.run()
    emit_reports(reports, out, cfg, plots=plots)
    if checkpoints:
        save_checkpoints(out, service.global_weights, service.cvae)
    click.echo(str(out))


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Fichero TOML del experimento.")
@click.option("--inspect", is_flag=True, help="Volcar el JSON de la partición por la salida estándar.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False), help="Guardar el JSON en un fichero.")
@click.option("--data-dir", default=None, type=click.Path(file_okay=False))
@handle_cli_errors
def partition(config_path: str, inspect: bool, out_path: Optional[str], data_dir: Optional[str]):
    """Construir la partición de clientes del experimento para auditoría."""
    cfg = load_experiment_config(config_path)
    train, _ = load_data(cfg, data_dir)
    result = build_partition(cfg, train)
    repository = PartitionRepository()
    logger.info(f"Partition '{result.scheme}': {result.num_clients} clients, sizes={result.sizes()}")
    if out_path:
        repository.save(result, out_path)
    if inspect or not out_path:
        click.echo(repository.dumps(result), nl=False)


@cli.command()
@click.argument("kind", type=click.Choice(["geomed", "trust"]))
@click.option("--instances", default=None, type=int, help="Número de instancias aleatorias.")
@click.option("--seed", default=0, type=int, show_default=True)
@handle_cli_errors
def oracle(kind: str, instances: Optional[int], seed: int):
    """Comparar GeoMed o trust propagation con su oráculo de fuerza bruta."""
    if kind == "geomed":
        summary = run_geomed_oracle(instances or 50, seed)
    else:
        summary = run_trust_oracle(instances or 200, seed)
    click.echo(json.dumps(summary, sort_keys=True))


if __name__ == "__main__":
    cli()
