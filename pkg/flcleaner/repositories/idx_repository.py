from pathlib import Path
from typing import Tuple, Union
import gzip
import logging
import struct

import numpy as np

from flcleaner.models.dataset import LabeledDataset
from flcleaner.utils.exceptions import (
    ConfigException, IdxCountMismatchException, IdxMagicException, IdxTruncatedException,
)

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

# Nombres estándar de la distribución MNIST / FashionMNIST
SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
DATASET_DIRS = {"mnist": "mnist", "fashion_mnist": "fashion_mnist"}

PathLike = Union[str, Path]


def _read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _read_header(path: str, data: bytes, expected_magic: int, fields: int) -> Tuple[int, ...]:
    header_size = 4 * (1 + fields)
    if len(data) < header_size:
        raise IdxTruncatedException(path, header_size, len(data))
    magic, *dims = struct.unpack_from(">" + "I" * (1 + fields), data)
    if magic != expected_magic:
        raise IdxMagicException(path, expected_magic, magic)
    return tuple(dims)


def read_idx_images(path: PathLike) -> np.ndarray:
    """Lee un fichero IDX3 de imágenes como uint8 (n, filas, columnas)."""
    data = _read_bytes(path)
    count, rows, cols = _read_header(str(path), data, IMAGES_MAGIC, 3)
    expected = count * rows * cols
    payload = data[16:16 + expected]
    if len(payload) < expected:
        raise IdxTruncatedException(str(path), expected, len(payload))
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path: PathLike) -> np.ndarray:
    """Lee un fichero IDX1 de etiquetas como uint8 (n,)."""
    data = _read_bytes(path)
    (count,) = _read_header(str(path), data, LABELS_MAGIC, 1)
    payload = data[8:8 + count]
    if len(payload) < count:
        raise IdxTruncatedException(str(path), count, len(payload))
    return np.frombuffer(payload, dtype=np.uint8)


def load_idx(images_path: PathLike, labels_path: PathLike, name: str = "") -> LabeledDataset:
    """Carga un par imágenes/etiquetas IDX con píxeles escalados a [0, 1]."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchException(str(labels_path), images.shape[0], labels.shape[0])
    logger.info(f"Loaded {images.shape[0]} samples from {images_path}")
    return LabeledDataset(images.astype(np.float64) / 255.0, labels.astype(np.int64), 10, name)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path: PathLike, labels_path: PathLike) -> None:
    """Escribe imágenes uint8 (n, filas, columnas) y etiquetas en formato IDX."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", LABELS_MAGIC, labels.shape[0]) + labels.tobytes())


def _resolve(directory: Path, filename: str) -> Path:
    for candidate in (directory / filename, directory / f"{filename}.gz"):
        if candidate.exists():
            return candidate
    raise ConfigException(f"no se encontró {filename}[.gz]", str(directory))


def load_dataset(name: str, split: str, data_dir: PathLike) -> LabeledDataset:
    """Carga MNIST o FashionMNIST desde <data_dir>/<name>/ con los nombres estándar."""
    if name not in DATASET_DIRS:
        raise ConfigException(f"dataset desconocido: {name}")
    if split not in SPLIT_FILES:
        raise ConfigException(f"split desconocido: {split}")
    directory = Path(data_dir) / DATASET_DIRS[name]
    images_name, labels_name = SPLIT_FILES[split]
    return load_idx(_resolve(directory, images_name), _resolve(directory, labels_name), name=f"{name}-{split}")
