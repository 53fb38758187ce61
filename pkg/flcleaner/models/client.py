from typing import List, Optional

BENIGN = "benign"
MALICIOUS = "malicious"


class ClientRecord:
    """Cliente simulado: índices de su partición, rol y ataque asociado."""

    def __init__(
        self,
        client_id: int,
        indices: List[int],
        role: str = BENIGN,
        attack=None,
        attacker_index: Optional[int] = None,
    ):
        self.client_id = client_id
        self.indices = indices
        self.role = role
        self.attack = attack
        self.attacker_index = attacker_index

    @property
    def is_malicious(self) -> bool:
        return self.role == MALICIOUS

    @property
    def num_samples(self) -> int:
        return len(self.indices)

    def __repr__(self) -> str:
        return f"ClientRecord(id={self.client_id}, role={self.role}, n={self.num_samples})"


class ClientUpdate:
    """Modelo local devuelto por un cliente al final de la ronda."""

    __slots__ = ("client_id", "weights", "num_samples")

    def __init__(self, client_id: int, weights, num_samples: int):
        self.client_id = client_id
        self.weights = weights
        self.num_samples = num_samples

    def __repr__(self) -> str:
        return f"ClientUpdate(id={self.client_id}, n={self.num_samples})"
