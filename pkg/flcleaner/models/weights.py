from typing import Optional, Sequence
import struct

import numpy as np

from flcleaner.utils.exceptions import LengthMismatchException, ShapeMismatchException

_LENGTH_PREFIX = struct.Struct("<Q")


class WeightVector:
    """Vector plano de todos los parámetros entrenables (capa a capa, row-major)."""

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim != 1:
            raise ShapeMismatchException("WeightVector", "vector 1-D", arr.shape)
        self.values = arr

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None

    def __repr__(self) -> str:
        return f"WeightVector(len={len(self)})"

    def copy(self) -> "WeightVector":
        return WeightVector(self.values)

    def to_bytes(self) -> bytes:
        """Serializa como longitud u64 little-endian seguida de float64 little-endian."""
        return _LENGTH_PREFIX.pack(len(self)) + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "WeightVector":
        """Reconstruye el vector desde su serialización binaria."""
        if len(data) < _LENGTH_PREFIX.size:
            raise LengthMismatchException(_LENGTH_PREFIX.size, len(data), "cabecera de WeightVector")
        (length,) = _LENGTH_PREFIX.unpack_from(data)
        payload = data[_LENGTH_PREFIX.size:]
        if len(payload) != 8 * length:
            raise LengthMismatchException(8 * length, len(payload), "carga de WeightVector (bytes)")
        return cls(np.frombuffer(payload, dtype="<f8"))


class ActivationMap:
    """Salidas pre-no-linealidad de las capas seleccionadas para una muestra del trigger set."""

    __slots__ = ("values", "sample_index", "layer_mask")

    def __init__(self, values: np.ndarray, sample_index: int, layer_mask: Sequence[int]):
        self.values = np.asarray(values, dtype=np.float64)
        self.sample_index = sample_index
        self.layer_mask = tuple(layer_mask)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __repr__(self) -> str:
        return f"ActivationMap(sample={self.sample_index}, dim={len(self)}, layers={self.layer_mask})"


def ensure_same_length(vectors: Sequence[WeightVector], expected: Optional[int] = None) -> int:
    """Comprueba que todos los vectores tienen la misma longitud y la devuelve."""
    if not vectors:
        raise LengthMismatchException(1, 0, "lista de modelos")
    length = expected if expected is not None else len(vectors[0])
    for vector in vectors:
        if len(vector) != length:
            raise LengthMismatchException(length, len(vector))
    return length
