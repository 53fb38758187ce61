"""
Capa de servicios - Red neuronal, CVAE, defensa, ataques y orquestación
"""

from .base import BaseService
from .experiment import ExperimentService, run_experiment

__all__ = ["BaseService", "ExperimentService", "run_experiment"]
