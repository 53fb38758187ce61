from typing import List, Optional, Sequence

import numpy as np

from flcleaner.models.weights import WeightVector
from flcleaner.utils.exceptions import ValidationException


class ClientScore:
    """Error de reconstrucción medio ε de un cliente sobre el trigger set."""

    def __init__(self, client_id: int, epsilon: float, accepted: bool = False):
        if not np.isfinite(epsilon) or epsilon < 0:
            raise ValidationException("epsilon", f"debe ser finito y >= 0, se recibió {epsilon}")
        self.client_id = int(client_id)
        self.epsilon = float(epsilon)
        self.accepted = accepted

    def __repr__(self) -> str:
        return f"ClientScore(client_id={self.client_id}, epsilon={self.epsilon:.6g}, accepted={self.accepted})"


class FilterDecision:
    """Clientes aceptados (núcleo benigno) y bloqueados en una ronda."""

    def __init__(
        self,
        benign_ids: Sequence[int],
        blocked_ids: Sequence[int],
        delta: Optional[float] = None,
        lam: Optional[float] = None,
    ):
        benign = [int(c) for c in benign_ids]
        blocked = sorted(int(c) for c in blocked_ids)
        if not benign:
            raise ValidationException("benign_ids", "el conjunto benigno no puede estar vacío")
        if set(benign) & set(blocked):
            raise ValidationException("blocked_ids", "un cliente no puede ser aceptado y bloqueado a la vez")
        self.benign_ids = benign
        self.blocked_ids = blocked
        self.delta = delta
        self.lam = lam

    @classmethod
    def accept_all(cls, client_ids: Sequence[int]) -> "FilterDecision":
        return cls(sorted(client_ids), [])

    @property
    def all_ids(self) -> List[int]:
        return sorted(self.benign_ids + self.blocked_ids)

    def __repr__(self) -> str:
        return f"FilterDecision(benign={self.benign_ids}, blocked={self.blocked_ids}, delta={self.delta})"


class DefenseOutcome:
    """Resultado de aplicar una defensa: decisión, nuevo modelo global, puntuaciones y avisos."""

    def __init__(
        self,
        decision: FilterDecision,
        global_weights: WeightVector,
        scores: Optional[List[ClientScore]] = None,
        warnings: Optional[List[str]] = None,
    ):
        self.decision = decision
        self.global_weights = global_weights
        self.scores = scores or []
        self.warnings = warnings or []

    def epsilons(self) -> dict:
        return {score.client_id: score.epsilon for score in self.scores}
