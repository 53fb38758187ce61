from typing import Any, Dict, List, Optional
from pydantic import BaseModel, ConfigDict, Field, model_validator


class RoundReport(BaseModel):
    """Métricas y decisión del filtro de una ronda."""

    model_config = ConfigDict(extra="forbid")

    round: int = Field(..., ge=1)
    acc: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    fpr: float = Field(..., ge=0, le=1)
    asr: Optional[float] = Field(None, ge=0, le=1)
    selected_ids: List[int]
    attacker_ids: List[int] = []
    benign_ids: List[int]
    blocked_ids: List[int]
    epsilons: Dict[int, float] = {}
    delta: Optional[float] = None
    lam: Optional[float] = None
    attack: Optional[Dict[str, Any]] = None
    wall_ms: float = Field(0.0, ge=0)
    flags: List[str] = []
    warnings: List[str] = []

    @model_validator(mode="after")
    def check_partition(self):
        accepted = set(self.benign_ids)
        blocked = set(self.blocked_ids)
        if accepted & blocked or accepted | blocked != set(self.selected_ids):
            raise ValueError("benign_ids y blocked_ids deben particionar los clientes seleccionados")
        return self


class MetricSummary(BaseModel):
    acc: float
    recall: float
    fpr: float
    asr: Optional[float] = None


class RunSummary(BaseModel):
    """Contenido de summary.json (sin tiempos, para que sea reproducible byte a byte)."""

    run_id: str
    rounds: int
    final: MetricSummary
    mean: MetricSummary
    flagged_rounds: Dict[str, List[int]] = {}
    attack: Optional[dict] = None
    config: dict
