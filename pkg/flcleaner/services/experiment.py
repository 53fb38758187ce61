from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union
import logging
import math
import time

from flcleaner.core.config import settings
from flcleaner.core.parallel import parallel_map
from flcleaner.models.client import BENIGN, MALICIOUS, ClientRecord, ClientUpdate
from flcleaner.models.cvae_state import CvaeState
from flcleaner.models.dataset import LabeledDataset, Partition, TriggerSet
from flcleaner.models.weights import WeightVector
from flcleaner.repositories.idx_repository import load_dataset
from flcleaner.schemas.experiment import DirichletPartitionConfig, ExperimentConfig
from flcleaner.schemas.model_spec import ModelSpec
from flcleaner.schemas.report import RoundReport
from flcleaner.services.attacks import build_attack_controller
from flcleaner.services.base import BaseService
from flcleaner.services.cvae import build_training_set, train_cvae
from flcleaner.services.datasets import (
    backdoor_test_set, evaluation_subset, make_synthetic_dataset, make_trigger_set,
    square_pattern, subsample,
)
from flcleaner.services.defense import DefenseStrategy, build_defense
from flcleaner.services.metrics import compute_metrics
from flcleaner.services.network import full_layer_mask, init_model, train_local
from flcleaner.services.partition import partition_dirichlet, partition_inverse_law
from flcleaner.utils.exceptions import ConfigException, ExperimentAbortedException
from flcleaner.utils.helpers import derive_rng, derive_seed, round_half_up

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# sub-flujos de la semilla de datos
_TRAIN_SUBSET, _TEST_SUBSET, _TRIGGER, _PARTITION, _SYNTH_TRAIN, _SYNTH_TEST = range(6)
# sub-flujos de la semilla de inicialización
_CVAE_HARVEST, _CVAE_TRAIN = 1, 2

SCORING_DEFENSES = ("fl_cleaner", "mean_threshold")


# =============================================================================
# SETUP HELPERS
# =============================================================================

def load_data(cfg: ExperimentConfig, data_dir: Optional[PathLike] = None) -> Tuple[LabeledDataset, LabeledDataset]:
    """Conjuntos de entrenamiento y test (reducidos a train_limit / test_limit)."""
    data_seed = cfg.seeds.data
    if cfg.dataset == "synthetic":
        syn = cfg.synthetic
        train = make_synthetic_dataset(
            syn.train_samples, syn.num_classes, syn.image_size, syn.noise, derive_seed(data_seed, _SYNTH_TRAIN),
        )
        test = make_synthetic_dataset(
            syn.test_samples, syn.num_classes, syn.image_size, syn.noise, derive_seed(data_seed, _SYNTH_TEST),
        )
    else:
        root = data_dir or cfg.data_dir or settings.DATA_DIR
        train = load_dataset(cfg.dataset, "train", root)
        test = load_dataset(cfg.dataset, "test", root)
    train = subsample(train, cfg.train_limit, derive_seed(data_seed, _TRAIN_SUBSET))
    test = subsample(test, cfg.test_limit, derive_seed(data_seed, _TEST_SUBSET))
    return train, test


def build_partition(cfg: ExperimentConfig, train: LabeledDataset) -> Partition:
    seed = derive_seed(cfg.seeds.data, _PARTITION)
    scheme = cfg.partition
    if isinstance(scheme, DirichletPartitionConfig):
        return partition_dirichlet(train, cfg.num_clients, scheme.alpha, seed)
    return partition_inverse_law(train, cfg.num_clients, scheme.alpha, scheme.gamma, scheme.r, seed)


def attacker_count(cfg: ExperimentConfig) -> int:
    """round(fracción · N), siempre por debajo de N/2."""
    return min(round_half_up(cfg.attacker_fraction * cfg.num_clients), (cfg.num_clients - 1) // 2)


def select_clients(cfg: ExperimentConfig, round_number: int) -> List[int]:
    """⌈participación · N⌉ clientes sin reemplazo, ordenados por id."""
    # tolerancia para productos como 0.3 * 10 = 3.0000000000000004
    count = max(1, math.ceil(cfg.participation * cfg.num_clients - 1e-9))
    chosen = derive_rng(cfg.seeds.selection, round_number).choice(cfg.num_clients, size=count, replace=False)
    return sorted(int(c) for c in chosen)


def build_clients(cfg: ExperimentConfig, partition: Partition) -> Dict[int, ClientRecord]:
    m = attacker_count(cfg)
    attackers = sorted(int(c) for c in derive_rng(cfg.seeds.attack).choice(cfg.num_clients, size=m, replace=False))
    clients = {}
    for client_id in range(cfg.num_clients):
        if client_id in attackers:
            clients[client_id] = ClientRecord(
                client_id, partition[client_id], MALICIOUS, cfg.attack, attackers.index(client_id),
            )
        else:
            clients[client_id] = ClientRecord(client_id, partition[client_id], BENIGN)
    return clients


# =============================================================================
# SERVICE
# =============================================================================

class ExperimentService(BaseService):
    """Bucle de rondas FL: selección, entrenamiento local o ataque, defensa, FedAvg y métricas."""

    def __init__(self, config: ExperimentConfig, data_dir: Optional[PathLike] = None):
        super().__init__(config)
        self.data_dir = data_dir
        self.train: Optional[LabeledDataset] = None
        self.eval_set: Optional[LabeledDataset] = None
        self.backdoor_set: Optional[LabeledDataset] = None
        self.trigger: Optional[TriggerSet] = None
        self.partition: Optional[Partition] = None
        self.clients: Dict[int, ClientRecord] = {}
        self.spec: Optional[ModelSpec] = None
        self.global_weights: Optional[WeightVector] = None
        self.cvae: Optional[CvaeState] = None
        self.defense: Optional[DefenseStrategy] = None
        self.layer_mask: Tuple[int, ...] = ()
        self._local_data: Dict[int, LabeledDataset] = {}
        self._controller = build_attack_controller(config.attack) if config.attack is not None else None

    def prepare(self) -> None:
        """Datos, partición, clientes, modelo inicial y (si aplica) CVAE."""
        cfg = self.config
        self.train, test = load_data(cfg, self.data_dir)
        self.trigger = make_trigger_set(test, cfg.trigger_size, derive_seed(cfg.seeds.data, _TRIGGER))
        self.eval_set = evaluation_subset(test, self.trigger)
        if cfg.is_backdoor_run:
            pattern = square_pattern(cfg.attack.pattern_size, cfg.attack.origin, cfg.attack.target_class)
            self.backdoor_set = backdoor_test_set(self.eval_set, pattern)

        self.partition = build_partition(cfg, self.train)
        self.clients = build_clients(cfg, self.partition)
        self._local_data = {cid: self.train.subset(rec.indices) for cid, rec in self.clients.items()}
        attackers = [cid for cid, rec in self.clients.items() if rec.is_malicious]
        logger.info(
            f"Prepared {cfg.dataset}: {len(self.train)} train, {len(self.eval_set)} eval, "
            f"{self.trigger.size} trigger samples; attackers={attackers}"
        )
        logger.debug(f"Train class counts: {self.train.class_counts().tolist()}")

        self.spec = cfg.model.build(self.train.sample_shape, self.train.num_classes, cfg.seeds.init)
        self.global_weights = init_model(self.spec)
        self.layer_mask = tuple(cfg.layer_mask) if cfg.layer_mask is not None else full_layer_mask(self.spec)

        if cfg.defense.kind in SCORING_DEFENSES:
            self.cvae = self.bootstrap_cvae()
        self.defense = build_defense(cfg.defense, self.spec, self.trigger, self.cvae, self.layer_mask)

    def bootstrap_cvae(self) -> CvaeState:
        """Entrena el CVAE con los NAMs del modelo simulado del servidor."""
        cfg = self.config
        cvae_cfg = cfg.cvae
        logger.info(
            f"Bootstrapping CVAE: {cvae_cfg.warmup_epochs} warmup + {cvae_cfg.harvest_epochs} harvest epochs"
        )
        training_set = build_training_set(
            self.global_weights, self.spec, self.trigger,
            cvae_cfg.warmup_epochs, cvae_cfg.harvest_epochs,
            cvae_cfg.server_lr or cfg.training.lr,
            batch_size=cfg.training.batch_size,
            layer_mask=self.layer_mask,
            seed=derive_seed(cfg.seeds.init, _CVAE_HARVEST),
            geomed_tol=cfg.defense.geomed_tol,
            geomed_max_iters=cfg.defense.geomed_max_iters,
        )
        state = train_cvae(
            training_set, cvae_cfg.epochs, cvae_cfg.beta, cvae_cfg.lr,
            seed=derive_seed(cfg.seeds.init, _CVAE_TRAIN),
            latent_dim=cvae_cfg.latent_dim, hidden_dim=cvae_cfg.hidden_dim, batch_size=cvae_cfg.batch_size,
        )
        logger.info(f"CVAE trained for {state.epoch} epochs (final beta={state.beta})")
        return state

    def _client_update(self, client_id: int, round_number: int) -> ClientUpdate:
        cfg = self.config
        record = self.clients[client_id]
        dataset = self._local_data[client_id]
        seed = derive_seed(cfg.seeds.data, round_number, client_id)
        if record.is_malicious:
            weights = self._controller.run(
                self.global_weights, self.spec, dataset, cfg.training, seed,
                derive_seed(cfg.seeds.attack, round_number, client_id), record.attacker_index,
            )
        else:
            weights = train_local(
                self.global_weights, self.spec, dataset,
                cfg.training.epochs, cfg.training.lr, cfg.training.batch_size, seed=seed,
            )
        return ClientUpdate(client_id, weights, record.num_samples)

    def run_round(self, round_number: int) -> RoundReport:
        started = time.perf_counter()
        selected = select_clients(self.config, round_number)
        updates = parallel_map(lambda cid: self._client_update(cid, round_number), selected)
        outcome = self.defense.apply(updates)
        self.global_weights = outcome.global_weights

        roles = {cid: self.clients[cid].role for cid in selected}
        metrics = compute_metrics(
            outcome.decision, roles, self.global_weights, self.spec, self.eval_set, self.backdoor_set,
        )
        flags = ["no_attackers"] if metrics.no_attackers else []
        if metrics.no_attackers and self.config.attacker_fraction > 0:
            logger.warning(f"Round {round_number}: no attackers selected, recall reported as 1.0")

        report = RoundReport(
            round=round_number,
            acc=metrics.acc,
            recall=metrics.recall,
            fpr=metrics.fpr,
            asr=metrics.asr,
            selected_ids=selected,
            attacker_ids=[cid for cid in selected if roles[cid] == MALICIOUS],
            benign_ids=outcome.decision.benign_ids,
            blocked_ids=outcome.decision.blocked_ids,
            epsilons=outcome.epsilons(),
            delta=outcome.decision.delta,
            lam=outcome.decision.lam,
            attack=self.config.attack.model_dump(mode="json") if self.config.attack is not None else None,
            wall_ms=(time.perf_counter() - started) * 1000.0,
            flags=flags,
            warnings=outcome.warnings,
        )
        asr = f"{report.asr:.4f}" if report.asr is not None else "-"
        logger.info(
            f"Round {round_number}/{self.config.rounds}: acc={report.acc:.4f} recall={report.recall:.4f} "
            f"fpr={report.fpr:.4f} asr={asr} blocked={report.blocked_ids}"
        )
        return report

    def run(self) -> List[RoundReport]:
        cfg = self.config
        attack = cfg.attack.kind if cfg.attack is not None else "none"
        logger.info(
            f"Starting experiment: dataset={cfg.dataset} clients={cfg.num_clients} rounds={cfg.rounds} "
            f"attack={attack} defense={cfg.defense.kind}"
        )
        try:
            self.prepare()
        except (ConfigException, ExperimentAbortedException):
            raise
        except Exception as e:
            logger.error(f"Experiment setup failed: {e}")
            raise ExperimentAbortedException(0, e) from e

        reports = []
        for round_number in range(1, cfg.rounds + 1):
            try:
                reports.append(self.run_round(round_number))
            except Exception as e:
                logger.error(f"Round {round_number} failed: {e}")
                raise ExperimentAbortedException(round_number, e) from e
        logger.info(f"Experiment finished after {len(reports)} rounds")
        return reports


def run_experiment(cfg: ExperimentConfig, data_dir: Optional[PathLike] = None) -> List[RoundReport]:
    """Ejecuta el experimento completo y devuelve un RoundReport por ronda."""
    return ExperimentService(cfg, data_dir).run()
