"""
Capa de repositorio - Ficheros IDX, checkpoints, particiones e informes
"""

from .base import BaseRepository
from .checkpoint_repository import CvaeCheckpointRepository, WeightCheckpointRepository, save_checkpoints
from .partition_repository import PartitionRepository
from .report_repository import ReportRepository, emit_reports

__all__ = [
    "BaseRepository", "CvaeCheckpointRepository", "WeightCheckpointRepository", "save_checkpoints",
    "PartitionRepository", "ReportRepository", "emit_reports"
]
