from typing import Tuple
import logging

import numpy as np

from flcleaner.models.dataset import BackdoorPattern, LabeledDataset, TriggerSet
from flcleaner.utils.exceptions import TriggerSetSizeException, ValidationException
from flcleaner.utils.helpers import round_half_up

logger = logging.getLogger(__name__)


def make_synthetic_dataset(
    num_samples: int,
    num_classes: int = 10,
    image_size: int = 8,
    noise: float = 0.15,
    seed: int = 0,
    prototype_seed: int = 12345,
) -> LabeledDataset:
    """Imágenes binarias por clase más ruido gaussiano, recortadas a [0, 1]."""
    if num_samples < 1:
        raise ValidationException("num_samples", "debe ser >= 1")
    # prototipos comunes a train/test: solo cambia la semilla de muestreo
    prototypes = (np.random.default_rng(prototype_seed).random((num_classes, 1, image_size, image_size)) < 0.5)
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(num_samples) % num_classes)
    images = prototypes[labels].astype(np.float64) + rng.normal(0.0, noise, (num_samples, 1, image_size, image_size))
    return LabeledDataset(np.clip(images, 0.0, 1.0), labels, num_classes, "synthetic")


def subsample(dataset: LabeledDataset, limit: int, seed: int) -> LabeledDataset:
    """Sub-muestra uniforme sin reemplazo (orden de índices creciente)."""
    if limit is None or limit >= len(dataset):
        return dataset
    idx = np.sort(np.random.default_rng(seed).choice(len(dataset), size=limit, replace=False))
    return dataset.subset(idx)


def make_trigger_set(test_set: LabeledDataset, size: int, seed: int) -> TriggerSet:
    """Trigger set: muestra uniforme sin reemplazo del conjunto de test."""
    if size < 1:
        raise ValidationException("trigger_size", "debe ser >= 1")
    if size > len(test_set):
        raise TriggerSetSizeException(size, len(test_set))
    idx = np.sort(np.random.default_rng(seed).choice(len(test_set), size=size, replace=False))
    return TriggerSet(test_set.images[idx], test_set.labels[idx], idx, test_set.num_classes)


def evaluation_subset(test_set: LabeledDataset, trigger: TriggerSet) -> LabeledDataset:
    """Muestras de test no usadas por el trigger set (evaluación de ACC)."""
    keep = np.ones(len(test_set), dtype=bool)
    keep[trigger.indices] = False
    return test_set.subset(np.flatnonzero(keep))


def square_pattern(size: int, origin: Tuple[int, int] = (0, 0), target_class: int = 0) -> BackdoorPattern:
    """Cuadrado blanco completo de size x size con esquina superior izquierda en origin."""
    if size < 2:
        raise ValidationException("pattern_size", "debe ser >= 2 para poder dividirlo en cuartos")
    return BackdoorPattern(size, tuple(origin), target_class)


def apply_trigger(sample: np.ndarray, pattern: BackdoorPattern) -> Tuple[np.ndarray, int]:
    """Pone a 1.0 los píxeles del patrón (todas las capas de canal) y devuelve la clase objetivo."""
    sample = np.array(sample, dtype=np.float64)
    mask = pattern.mask(sample.shape[-2], sample.shape[-1])
    sample[..., mask] = 1.0
    return sample, pattern.target_class


def poison_dataset(
    dataset: LabeledDataset,
    pattern: BackdoorPattern,
    rate: float,
    rng: np.random.Generator,
) -> LabeledDataset:
    """Copia del conjunto con una fracción 'rate' de muestras envenenadas."""
    count = round_half_up(rate * len(dataset))
    if count == 0:
        return dataset
    idx = rng.choice(len(dataset), size=count, replace=False)
    images = dataset.images.copy()
    labels = dataset.labels.copy()
    images[idx], target = apply_trigger(images[idx], pattern)
    labels[idx] = target
    return dataset.with_samples(images, labels)


def backdoor_test_set(eval_set: LabeledDataset, pattern: BackdoorPattern) -> LabeledDataset:
    """Copias con disparador de las muestras cuya clase real no es la objetivo."""
    keep = np.flatnonzero(eval_set.labels != pattern.target_class)
    clean = eval_set.subset(keep)
    images, target = apply_trigger(clean.images, pattern)
    return clean.with_samples(images, np.full(len(clean), target, dtype=np.int64))
