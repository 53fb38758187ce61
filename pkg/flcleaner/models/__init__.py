"""
Modelos de dominio del simulador
"""

from .client import ClientRecord, ClientUpdate
from .cvae_state import CvaeState, CvaeTrainingSet
from .dataset import BackdoorPattern, LabeledDataset, Partition, TriggerSet
from .defense import ClientScore, DefenseOutcome, FilterDecision
from .weights import ActivationMap, WeightVector

__all__ = [
    "ClientRecord", "ClientUpdate", "CvaeState", "CvaeTrainingSet",
    "BackdoorPattern", "LabeledDataset", "Partition", "TriggerSet",
    "ClientScore", "DefenseOutcome", "FilterDecision", "ActivationMap", "WeightVector"
]
