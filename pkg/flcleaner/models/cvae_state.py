from typing import Dict, List, Tuple

import numpy as np

from flcleaner.models.weights import WeightVector
from flcleaner.utils.exceptions import LengthMismatchException, ValidationException


class CvaeState:
    """Parámetros del CVAE (codificador y decodificador MLP de dos capas) y posición de β."""

    PARAM_ORDER = ("enc_w1", "enc_b1", "enc_w2", "enc_b2", "dec_w1", "dec_b1", "dec_w2", "dec_b2")

    def __init__(
        self,
        params: Dict[str, np.ndarray],
        input_dim: int,
        latent_dim: int,
        num_classes: int,
        hidden_dim: int = 100,
        beta: float = 0.0,
        epoch: int = 0,
        seed: int = 0,
    ):
        if beta < 0:
            raise ValidationException("beta", "debe ser >= 0")
        self.input_dim = input_dim
        self.latent_dim = latent_dim
        self.num_classes = num_classes
        self.hidden_dim = hidden_dim
        self.beta = beta
        self.epoch = epoch
        self.seed = seed
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in self.PARAM_ORDER}
        for name, shape in self.param_shapes().items():
            if self.params[name].shape != shape:
                raise LengthMismatchException(int(np.prod(shape)), self.params[name].size, f"parámetro {name}")

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        d, k, h, z = self.input_dim, self.num_classes, self.hidden_dim, self.latent_dim
        return {
            "enc_w1": (d + k, h), "enc_b1": (h,),
            "enc_w2": (h, 2 * z), "enc_b2": (2 * z,),
            "dec_w1": (z + k, h), "dec_b1": (h,),
            "dec_w2": (h, d), "dec_b2": (d,),
        }

    def header(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "latent_dim": self.latent_dim,
            "hidden_dim": self.hidden_dim,
            "num_classes": self.num_classes,
            "beta": self.beta,
            "epoch": self.epoch,
            "seed": self.seed,
        }

    def to_vector(self) -> WeightVector:
        return WeightVector(np.concatenate([self.params[name].ravel() for name in self.PARAM_ORDER]))

    @classmethod
    def from_vector(cls, header: dict, vector: WeightVector) -> "CvaeState":
        """Reconstruye el estado a partir de la cabecera y el vector plano."""
        template = cls._empty(header)
        params = {}
        offset = 0
        for name, shape in template.param_shapes().items():
            size = int(np.prod(shape))
            params[name] = vector.values[offset:offset + size].reshape(shape)
            offset += size
        if offset != len(vector):
            raise LengthMismatchException(offset, len(vector), "vector del CVAE")
        return cls(params, **header)

    @classmethod
    def _empty(cls, header: dict) -> "CvaeState":
        state = cls.__new__(cls)
        state.input_dim = header["input_dim"]
        state.latent_dim = header["latent_dim"]
        state.num_classes = header["num_classes"]
        state.hidden_dim = header.get("hidden_dim", 100)
        return state

    def copy(self) -> "CvaeState":
        return CvaeState(
            {name: value.copy() for name, value in self.params.items()},
            self.input_dim, self.latent_dim, self.num_classes, self.hidden_dim,
            self.beta, self.epoch, self.seed,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, CvaeState):
            return NotImplemented
        return self.header() == other.header() and self.to_vector() == other.to_vector()

    __hash__ = None

    def __repr__(self) -> str:
        return f"CvaeState(input_dim={self.input_dim}, latent_dim={self.latent_dim}, beta={self.beta}, epoch={self.epoch})"


class CvaeTrainingSet:
    """NAMs del modelo simulado del servidor, con su etiqueta y la época de cosecha."""

    def __init__(self, nams: np.ndarray, labels: np.ndarray, epochs: np.ndarray, num_classes: int):
        self.nams = np.asarray(nams, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.epochs = np.asarray(epochs, dtype=np.int64)
        self.num_classes = num_classes

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.nams.shape[1]

    def by_epoch(self) -> List[Tuple[int, np.ndarray]]:
        return [(int(e), self.nams[self.epochs == e]) for e in np.unique(self.epochs)]
