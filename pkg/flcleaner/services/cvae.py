from typing import Dict, Optional, Sequence, Tuple
import logging

import numpy as np

from flcleaner.models.cvae_state import CvaeState, CvaeTrainingSet
from flcleaner.models.dataset import TriggerSet
from flcleaner.models.weights import WeightVector
from flcleaner.schemas.experiment import BetaSchedule
from flcleaner.schemas.model_spec import ModelSpec
from flcleaner.services.geomed import DEFAULT_MAX_ITERS, DEFAULT_TOL, geometric_median
from flcleaner.services.network import activation_matrix, full_layer_mask, train_local
from flcleaner.utils.exceptions import (
    DivergenceException, EmptyDatasetException, ShapeMismatchException, ValidationException,
)
from flcleaner.utils.helpers import NAM_EPSILON, derive_rng, glorot_uniform, sigmoid

logger = logging.getLogger(__name__)

Gradients = Dict[str, np.ndarray]


# =============================================================================
# NORMALIZATION AND SCHEDULE
# =============================================================================

def normalize_activations(ams: np.ndarray, geomed: np.ndarray) -> np.ndarray:
    """NAM = σ(AM − GeoMed), recortado al interior estricto de (0, 1)."""
    return np.clip(sigmoid(np.asarray(ams) - geomed), NAM_EPSILON, 1.0 - NAM_EPSILON)


def beta_at_epoch(epoch: int, schedule: BetaSchedule) -> float:
    """β para la época (empezando en 1): initial + increment · ⌊(epoch − 1) / step_epoch⌋."""
    if epoch < 1:
        raise ValidationException("epoch", "las épocas empiezan en 1")
    return schedule.initial + schedule.increment * ((epoch - 1) // schedule.step_epoch)


# =============================================================================
# STATE
# =============================================================================

def init_cvae(input_dim: int, num_classes: int, latent_dim: int = 16, hidden_dim: int = 100, seed: int = 0) -> CvaeState:
    """CVAE con pesos Glorot uniformes y sesgos nulos."""
    if input_dim < 1:
        raise ValidationException("input_dim", "el mapa de activación está vacío")
    rng = np.random.default_rng(seed)
    template = CvaeState._empty({
        "input_dim": input_dim, "latent_dim": latent_dim,
        "num_classes": num_classes, "hidden_dim": hidden_dim,
    })
    params = {}
    for name, shape in template.param_shapes().items():
        if len(shape) == 2:
            params[name] = glorot_uniform(rng, shape, shape[0], shape[1])
        else:
            params[name] = np.zeros(shape)
    return CvaeState(params, input_dim, latent_dim, num_classes, hidden_dim, seed=seed)


def _one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim == 2:
        return labels.astype(np.float64)
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels.astype(np.int64)] = 1.0
    return out


def _as_batch(state: CvaeState, x: np.ndarray, labels) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
        labels = np.asarray(labels)
        # una sola muestra: etiqueta escalar o vector one-hot
        labels = labels[None, :] if labels.ndim == 1 else labels.reshape(1)
    if x.ndim != 2 or x.shape[1] != state.input_dim:
        raise ShapeMismatchException("NAM", f"(n, {state.input_dim})", x.shape)
    y = _one_hot(labels, state.num_classes)
    if y.shape != (x.shape[0], state.num_classes):
        raise ShapeMismatchException("condición one-hot", (x.shape[0], state.num_classes), y.shape)
    return x, y


# =============================================================================
# FORWARD / BACKWARD
# =============================================================================

def _encode(p: Dict[str, np.ndarray], x: np.ndarray, y: np.ndarray, latent_dim: int):
    enc_in = np.concatenate([x, y], axis=1)
    h_pre = enc_in @ p["enc_w1"] + p["enc_b1"]
    h = np.maximum(h_pre, 0.0)
    out = h @ p["enc_w2"] + p["enc_b2"]
    return out[:, :latent_dim], out[:, latent_dim:], (enc_in, h_pre, h)


def _decode(p: Dict[str, np.ndarray], z: np.ndarray, y: np.ndarray):
    dec_in = np.concatenate([z, y], axis=1)
    g_pre = dec_in @ p["dec_w1"] + p["dec_b1"]
    g = np.maximum(g_pre, 0.0)
    x_hat = sigmoid(g @ p["dec_w2"] + p["dec_b2"])
    return x_hat, (dec_in, g_pre, g)


def kl_divergence(mu: np.ndarray, logvar: np.ndarray) -> float:
    """½ Σ (σ² + μ² − 1 − log σ²), promediado sobre el lote."""
    mu = np.atleast_2d(mu)
    logvar = np.atleast_2d(logvar)
    return float(np.mean(0.5 * np.sum(np.exp(logvar) + mu ** 2 - 1.0 - logvar, axis=1)))


def _check_finite(where: str, *values: float) -> None:
    for value in values:
        if not np.isfinite(value):
            raise DivergenceException(where, value)


def loss_and_gradients(
    state: CvaeState,
    x: np.ndarray,
    labels,
    noise: np.ndarray,
    beta: Optional[float] = None,
) -> Tuple[float, float, float, Gradients]:
    """Pérdida total, MSE, KL y gradientes de todos los parámetros con ruido fijo."""
    x, y = _as_batch(state, x, labels)
    beta = state.beta if beta is None else beta
    p = state.params
    n, d = x.shape
    noise = np.asarray(noise, dtype=np.float64).reshape(n, state.latent_dim)

    mu, logvar, (enc_in, h_pre, h) = _encode(p, x, y, state.latent_dim)
    std = np.exp(0.5 * logvar)
    z = mu + std * noise
    x_hat, (dec_in, g_pre, g) = _decode(p, z, y)

    mse = float(np.mean((x_hat - x) ** 2))
    kl = kl_divergence(mu, logvar)
    total = mse + beta * kl
    _check_finite("cvae_loss", mse, kl, total)

    grads: Gradients = {}
    d_out = 2.0 * (x_hat - x) / (n * d) * x_hat * (1.0 - x_hat)
    grads["dec_w2"] = g.T @ d_out
    grads["dec_b2"] = d_out.sum(axis=0)
    d_g = (d_out @ p["dec_w2"].T) * (g_pre > 0)
    grads["dec_w1"] = dec_in.T @ d_g
    grads["dec_b1"] = d_g.sum(axis=0)
    d_z = (d_g @ p["dec_w1"].T)[:, :state.latent_dim]

    d_mu = d_z + beta * mu / n
    d_logvar = d_z * noise * 0.5 * std + beta * 0.5 * (np.exp(logvar) - 1.0) / n
    d_enc = np.concatenate([d_mu, d_logvar], axis=1)
    grads["enc_w2"] = h.T @ d_enc
    grads["enc_b2"] = d_enc.sum(axis=0)
    d_h = (d_enc @ p["enc_w2"].T) * (h_pre > 0)
    grads["enc_w1"] = enc_in.T @ d_h
    grads["enc_b1"] = d_h.sum(axis=0)
    return total, mse, kl, grads


def cvae_loss(x: np.ndarray, y, state: CvaeState, noise: np.ndarray, beta: Optional[float] = None) -> Tuple[float, float, float]:
    """(total, mse, kl) con z = μ + σ · ruido; total = mse + β · kl."""
    total, mse, kl, _ = loss_and_gradients(state, x, y, noise, beta)
    return total, mse, kl


# =============================================================================
# TRAINING SET AND TRAINING
# =============================================================================

def build_training_set(
    global_model_init: WeightVector,
    spec: ModelSpec,
    trigger: TriggerSet,
    warmup_epochs: int,
    harvest_epochs: int,
    lr: float,
    batch_size: int = 32,
    layer_mask: Optional[Sequence[int]] = None,
    seed: int = 0,
    geomed_tol: float = DEFAULT_TOL,
    geomed_max_iters: int = DEFAULT_MAX_ITERS,
) -> CvaeTrainingSet:
    """Entrena una copia del modelo global sobre el trigger set y cosecha NAMs tras el warmup."""
    if harvest_epochs < 1:
        raise ValidationException("harvest_epochs", "debe ser >= 1")
    if warmup_epochs < 0:
        raise ValidationException("warmup_epochs", "debe ser >= 0")
    mask = tuple(layer_mask) if layer_mask is not None else full_layer_mask(spec)
    if not mask:
        raise ValidationException("layer_mask", "el CVAE necesita al menos una capa")

    dataset = trigger.as_dataset()
    weights = global_model_init.copy()
    nams, labels, epochs = [], [], []

    for epoch in range(warmup_epochs + harvest_epochs):
        weights = train_local(weights, spec, dataset, 1, lr, batch_size, seed=seed, start_epoch=epoch)
        if epoch < warmup_epochs:
            continue
        ams = activation_matrix(weights, spec, trigger.samples, mask)
        result = geometric_median(ams, tol=geomed_tol, max_iters=geomed_max_iters)
        if not result.converged:
            logger.warning(f"GeoMed over trigger samples did not converge at server epoch {epoch + 1}")
        nams.append(normalize_activations(ams, result.median))
        labels.append(trigger.labels)
        epochs.append(np.full(trigger.size, epoch + 1))
        logger.debug(f"Harvested {trigger.size} NAMs at server epoch {epoch + 1}")

    training_set = CvaeTrainingSet(
        np.concatenate(nams), np.concatenate(labels), np.concatenate(epochs), trigger.num_classes,
    )
    logger.info(f"CVAE training set: {len(training_set)} NAMs of dimension {training_set.dim}")
    return training_set


def train_cvae(
    ts: CvaeTrainingSet,
    epochs: int = 20,
    beta_schedule: BetaSchedule = BetaSchedule(),
    lr: float = 1e-2,
    seed: int = 0,
    latent_dim: int = 16,
    hidden_dim: int = 100,
    batch_size: int = 64,
    state: Optional[CvaeState] = None,
) -> CvaeState:
    """SGD sobre cvae_loss con recocido de β; devuelve el estado tras la última época."""
    if len(ts) == 0:
        raise EmptyDatasetException("train_cvae")
    if lr <= 0:
        raise ValidationException("lr", "debe ser > 0")
    state = state.copy() if state is not None else init_cvae(ts.dim, ts.num_classes, latent_dim, hidden_dim, seed)

    n = len(ts)
    for epoch in range(1, epochs + 1):
        beta = beta_at_epoch(epoch, beta_schedule)
        rng = derive_rng(seed, epoch)
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            noise = rng.standard_normal((idx.shape[0], state.latent_dim))
            total, _, _, grads = loss_and_gradients(state, ts.nams[idx], ts.labels[idx], noise, beta)
            for name, grad in grads.items():
                state.params[name] -= lr * grad
            epoch_loss += total * idx.shape[0]
        _check_finite(f"train_cvae epoch {epoch}", epoch_loss)
        state.beta = beta
        state.epoch = epoch
        logger.debug(f"CVAE epoch {epoch}/{epochs}: loss={epoch_loss / n:.6f} beta={beta}")

    return state


# =============================================================================
# SCORING
# =============================================================================

def _reconstruct_batch(state: CvaeState, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    mu, _, _ = _encode(state.params, x, y, state.latent_dim)
    x_hat, _ = _decode(state.params, mu, y)
    return x_hat


def reconstruct(state: CvaeState, nams: np.ndarray, labels) -> np.ndarray:
    """Reconstrucción determinista (z = μ)."""
    x, y = _as_batch(state, nams, labels)
    return _reconstruct_batch(state, x, y)


def reconstruction_errors(state: CvaeState, nams: np.ndarray, labels) -> np.ndarray:
    """MSE por muestra entre cada NAM y su reconstrucción."""
    x, y = _as_batch(state, nams, labels)
    return np.mean((_reconstruct_batch(state, x, y) - x) ** 2, axis=1)


def reconstruction_error(state: CvaeState, nam: np.ndarray, y: int) -> float:
    return float(reconstruction_errors(state, np.asarray(nam)[None, :], np.array([y]))[0])
