"""
Esquemas Pydantic para validación de configuración e informes
"""

from .experiment import AttackSpec, BetaSchedule, DefenseConfig, ExperimentConfig
from .model_spec import ModelSpec, cnn_spec, mlp_spec
from .report import RoundReport, RunSummary

__all__ = [
    "AttackSpec", "BetaSchedule", "DefenseConfig", "ExperimentConfig",
    "ModelSpec", "cnn_spec", "mlp_spec", "RoundReport", "RunSummary"
]
