from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from flcleaner.utils.exceptions import ShapeMismatchException, ValidationException


class LabeledDataset:
    """Conjunto de imágenes (n, c, h, w) en [0, 1] con etiquetas enteras."""

    def __init__(self, images: np.ndarray, labels: np.ndarray, num_classes: int = 10, name: str = ""):
        images = np.asarray(images, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if images.ndim == 3:
            images = images[:, None, :, :]
        if images.ndim != 4:
            raise ShapeMismatchException("imágenes", "(n, c, h, w)", images.shape)
        if labels.shape != (images.shape[0],):
            raise ShapeMismatchException("etiquetas", (images.shape[0],), labels.shape)
        self.images = images
        self.labels = labels
        self.num_classes = num_classes
        self.name = name

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __repr__(self) -> str:
        return f"LabeledDataset(name={self.name!r}, n={len(self)}, shape={self.sample_shape})"

    @property
    def sample_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        """Sub-conjunto con las muestras indicadas (en ese orden)."""
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.images[idx], self.labels[idx], self.num_classes, self.name)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def with_samples(self, images: np.ndarray, labels: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(images, labels, self.num_classes, self.name)


class TriggerSet:
    """Pequeño conjunto etiquetado del servidor (X_T, Y_T) usado para sondear modelos."""

    def __init__(self, samples: np.ndarray, labels: np.ndarray, indices: Sequence[int], num_classes: int = 10):
        if len(labels) < 1:
            raise ValidationException("trigger_set", "debe contener al menos una muestra")
        labels = np.asarray(labels, dtype=np.int64)
        if labels.min() < 0 or labels.max() >= num_classes:
            raise ValidationException("trigger_set", "etiquetas fuera de rango")
        self.samples = np.asarray(samples, dtype=np.float64)
        self.labels = labels
        self.indices = np.asarray(indices, dtype=np.int64)
        self.num_classes = num_classes

    @property
    def size(self) -> int:
        return self.labels.shape[0]

    def __len__(self) -> int:
        return self.size

    def as_dataset(self) -> LabeledDataset:
        return LabeledDataset(self.samples, self.labels, self.num_classes, "trigger")


class Partition:
    """Asignación de índices de muestra por cliente."""

    def __init__(self, assignments: Dict[int, List[int]], seed: int, scheme: str = ""):
        self.assignments = {int(k): [int(i) for i in v] for k, v in sorted(assignments.items())}
        self.seed = seed
        self.scheme = scheme

    @property
    def num_clients(self) -> int:
        return len(self.assignments)

    def sizes(self) -> List[int]:
        return [len(self.assignments[c]) for c in sorted(self.assignments)]

    def __getitem__(self, client_id: int) -> List[int]:
        return self.assignments[client_id]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self.assignments == other.assignments

    __hash__ = None

    def to_dict(self) -> dict:
        """Formato de auditoría {client_id: [índices]}."""
        return {str(client): indices for client, indices in self.assignments.items()}

    @classmethod
    def from_dict(cls, data: dict, seed: int = 0, scheme: str = "") -> "Partition":
        return cls({int(k): list(v) for k, v in data.items()}, seed=seed, scheme=scheme)


class BackdoorPattern:
    """Cuadrado blanco de size x size píxeles; part_index selecciona un cuarto (DBA)."""

    def __init__(
        self,
        size: int = 10,
        origin: Tuple[int, int] = (0, 0),
        target_class: int = 0,
        part_index: Optional[int] = None,
    ):
        if size < 2 or size % 2:
            raise ValidationException("pattern.size", "debe ser par y >= 2")
        if part_index is not None and part_index not in (0, 1, 2, 3):
            raise ValidationException("pattern.part_index", "debe estar en 0..3")
        self.size = size
        self.origin = (int(origin[0]), int(origin[1]))
        self.target_class = target_class
        self.part_index = part_index

    def __repr__(self) -> str:
        return f"BackdoorPattern(size={self.size}, origin={self.origin}, target={self.target_class}, part={self.part_index})"

    def quarter(self, part_index: int) -> "BackdoorPattern":
        return BackdoorPattern(self.size, self.origin, self.target_class, part_index)

    @property
    def bounds(self) -> Tuple[int, int, int, int]:
        """(fila_inicio, fila_fin, col_inicio, col_fin) del área activa."""
        r0, c0 = self.origin
        if self.part_index is None:
            return r0, r0 + self.size, c0, c0 + self.size
        half = self.size // 2
        row_off = half * (self.part_index // 2)
        col_off = half * (self.part_index % 2)
        return r0 + row_off, r0 + row_off + half, c0 + col_off, c0 + col_off + half

    @property
    def positions(self) -> List[Tuple[int, int]]:
        r_start, r_end, c_start, c_end = self.bounds
        return [(r, c) for r in range(r_start, r_end) for c in range(c_start, c_end)]

    def mask(self, height: int, width: int) -> np.ndarray:
        r_start, r_end, c_start, c_end = self.bounds
        if r_start < 0 or c_start < 0 or r_end > height or c_end > width:
            raise ValidationException("pattern", f"fuera de la imagen {height}x{width}")
        mask = np.zeros((height, width), dtype=bool)
        mask[r_start:r_end, c_start:c_end] = True
        return mask
