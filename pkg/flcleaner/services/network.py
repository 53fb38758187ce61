from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from flcleaner.models.dataset import LabeledDataset
from flcleaner.models.weights import ActivationMap, WeightVector
from flcleaner.schemas.model_spec import (
    Conv2dLayer, DenseLayer, FlattenLayer, MaxPool2Layer,
    ModelSpec, ReluLayer, SigmoidLayer, SoftmaxLayer,
)
from flcleaner.utils.exceptions import (
    EmptyDatasetException, LengthMismatchException, ShapeCompositionException,
    ShapeMismatchException, ValidationException,
)
from flcleaner.utils.helpers import derive_rng, glorot_uniform, sigmoid

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]
LayerMask = Sequence[int]

EVAL_CHUNK = 512


# =============================================================================
# SHAPES AND PARAMETER LAYOUT
# =============================================================================

def _layer_output_shape(layer, shape: Shape) -> Shape:
    if isinstance(layer, DenseLayer):
        if int(np.prod(shape)) != layer.in_features:
            raise ValueError(f"{int(np.prod(shape))} entradas, se esperaban {layer.in_features}")
        return (layer.out_features,)
    if isinstance(layer, Conv2dLayer):
        if len(shape) != 3 or shape[0] != layer.in_channels:
            raise ValueError(f"se esperaban {layer.in_channels} canales sobre (c, h, w)")
        if shape[1] < layer.kernel_size or shape[2] < layer.kernel_size:
            raise ValueError("la imagen es menor que el kernel")
        k = layer.kernel_size
        return (layer.out_channels, shape[1] - k + 1, shape[2] - k + 1)
    if isinstance(layer, MaxPool2Layer):
        if len(shape) != 3 or shape[1] < 2 or shape[2] < 2:
            raise ValueError("maxpool2 necesita (c, h, w) con h, w >= 2")
        return (shape[0], shape[1] // 2, shape[2] // 2)
    if isinstance(layer, FlattenLayer):
        return (int(np.prod(shape)),)
    if isinstance(layer, SoftmaxLayer):
        if len(shape) != 1:
            raise ValueError("softmax necesita una entrada plana")
        return shape
    return shape


def infer_shapes(spec: ModelSpec) -> List[Shape]:
    """Forma de salida de cada capa; falla nombrando el par de capas que no encaja."""
    shape: Shape = tuple(spec.input_shape)
    shapes: List[Shape] = []
    for i, layer in enumerate(spec.layers):
        try:
            shape = _layer_output_shape(layer, shape)
        except ValueError as e:
            left = spec.layers[i - 1].describe() if i else f"entrada{tuple(spec.input_shape)}"
            raise ShapeCompositionException(i - 1, left, layer.describe(), str(e))
        shapes.append(shape)

    softmax_positions = [i for i, layer in enumerate(spec.layers) if isinstance(layer, SoftmaxLayer)]
    if softmax_positions != [len(spec.layers) - 1]:
        raise ValidationException("layers", "un modelo de clasificación necesita exactamente un softmax final")
    if not spec.parametric_layers:
        raise ValidationException("layers", "el modelo no tiene capas entrenables")
    return shapes


def _param_shapes(layer) -> List[Tuple[str, Shape]]:
    if isinstance(layer, DenseLayer):
        return [("W", (layer.in_features, layer.out_features)), ("b", (layer.out_features,))]
    k = layer.kernel_size
    return [("W", (layer.out_channels, layer.in_channels, k, k)), ("b", (layer.out_channels,))]


def _layout(spec: ModelSpec) -> List[Dict[str, Tuple[slice, Shape]]]:
    layout = []
    offset = 0
    for layer in spec.parametric_layers:
        entry = {}
        for name, shape in _param_shapes(layer):
            size = int(np.prod(shape))
            entry[name] = (slice(offset, offset + size), shape)
            offset += size
        layout.append(entry)
    return layout


def parameter_count(spec: ModelSpec) -> int:
    """Número total de parámetros entrenables."""
    return sum(int(np.prod(shape)) for layer in spec.parametric_layers for _, shape in _param_shapes(layer))


def _unpack(values: np.ndarray, layout) -> List[Dict[str, np.ndarray]]:
    return [{name: values[sl].reshape(shape) for name, (sl, shape) in entry.items()} for entry in layout]


def full_layer_mask(spec: ModelSpec) -> Tuple[int, ...]:
    """Máscara que selecciona todas las capas entrenables."""
    return tuple(range(len(spec.parametric_layers)))


def _check_weights(weights: WeightVector, spec: ModelSpec) -> None:
    expected = parameter_count(spec)
    if len(weights) != expected:
        raise LengthMismatchException(expected, len(weights))


def _check_batch(batch: np.ndarray, spec: ModelSpec) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 4 or tuple(batch.shape[1:]) != tuple(spec.input_shape):
        raise ShapeMismatchException("lote de entrada", ("n",) + tuple(spec.input_shape), batch.shape)
    return batch


# =============================================================================
# INITIALIZATION
# =============================================================================

def init_model(spec: ModelSpec) -> WeightVector:
    """Pesos iniciales deterministas: uniforme escalada por capa, sesgos a cero."""
    infer_shapes(spec)
    rng = np.random.default_rng(spec.seed)
    chunks = []
    for layer in spec.parametric_layers:
        if isinstance(layer, DenseLayer):
            fan_in, fan_out = layer.in_features, layer.out_features
        else:
            area = layer.kernel_size * layer.kernel_size
            fan_in, fan_out = layer.in_channels * area, layer.out_channels * area
        for name, shape in _param_shapes(layer):
            if name == "W":
                chunks.append(glorot_uniform(rng, shape, fan_in, fan_out).ravel())
            else:
                chunks.append(np.zeros(shape).ravel())
    return WeightVector(np.concatenate(chunks))


# =============================================================================
# FORWARD / BACKWARD
# =============================================================================

def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _maxpool_forward(x: np.ndarray):
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    blocks = x[:, :, :2 * h2, :2 * w2].reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, h2, w2, 4)
    # argmax elige el primer máximo: los empates van a una sola posición
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _maxpool_backward(grad: np.ndarray, idx: np.ndarray, input_shape: Shape) -> np.ndarray:
    n, c, h, w = input_shape
    h2, w2 = h // 2, w // 2
    blocks = np.zeros((n, c, h2, w2, 4))
    np.put_along_axis(blocks, idx[..., None], grad[..., None], axis=-1)
    blocks = blocks.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h2, 2 * w2)
    dx = np.zeros(input_shape)
    dx[:, :, :2 * h2, :2 * w2] = blocks
    return dx


def _run_forward(params, spec: ModelSpec, x: np.ndarray, keep_cache: bool):
    """Devuelve (logits, salidas pre-no-linealidad por capa entrenable, caché)."""
    caches = []
    pre_activations = []
    p = 0
    out = x
    logits = None
    for layer in spec.layers:
        if isinstance(layer, DenseLayer):
            flat = out.reshape(out.shape[0], -1)
            z = flat @ params[p]["W"] + params[p]["b"]
            caches.append((out.shape, flat, p))
            pre_activations.append(z)
            out = z
            p += 1
        elif isinstance(layer, Conv2dLayer):
            k = layer.kernel_size
            windows = sliding_window_view(out, (k, k), axis=(2, 3))
            z = np.einsum("nchwij,ocij->nohw", windows, params[p]["W"], optimize=True)
            z = z + params[p]["b"][None, :, None, None]
            caches.append((out.shape, windows if keep_cache else None, p))
            pre_activations.append(z)
            out = z
            p += 1
        elif isinstance(layer, ReluLayer):
            caches.append(out if keep_cache else None)
            out = np.maximum(out, 0.0)
        elif isinstance(layer, SigmoidLayer):
            out = sigmoid(out)
            caches.append(out if keep_cache else None)
        elif isinstance(layer, MaxPool2Layer):
            shape = out.shape
            out, idx = _maxpool_forward(out)
            caches.append((shape, idx))
        elif isinstance(layer, FlattenLayer):
            caches.append(out.shape)
            out = out.reshape(out.shape[0], -1)
        elif isinstance(layer, SoftmaxLayer):
            logits = out
            caches.append(None)
    return logits, pre_activations, caches


def _run_backward(params, spec: ModelSpec, caches, grad_logits: np.ndarray):
    grads: List[Dict[str, np.ndarray]] = [dict() for _ in params]
    g = grad_logits
    for layer, cache in zip(reversed(spec.layers[:-1]), reversed(caches[:-1])):
        if isinstance(layer, DenseLayer):
            input_shape, flat, p = cache
            grads[p]["W"] = flat.T @ g
            grads[p]["b"] = g.sum(axis=0)
            g = (g @ params[p]["W"].T).reshape(input_shape)
        elif isinstance(layer, Conv2dLayer):
            input_shape, windows, p = cache
            W = params[p]["W"]
            k = layer.kernel_size
            grads[p]["W"] = np.einsum("nchwij,nohw->ocij", windows, g, optimize=True)
            grads[p]["b"] = g.sum(axis=(0, 2, 3))
            dx = np.zeros(input_shape)
            h_out, w_out = g.shape[2], g.shape[3]
            for i in range(k):
                for j in range(k):
                    dx[:, :, i:i + h_out, j:j + w_out] += np.einsum("nohw,oc->nchw", g, W[:, :, i, j])
            g = dx
        elif isinstance(layer, ReluLayer):
            g = g * (cache > 0)
        elif isinstance(layer, SigmoidLayer):
            g = g * cache * (1.0 - cache)
        elif isinstance(layer, MaxPool2Layer):
            shape, idx = cache
            g = _maxpool_backward(g, idx, shape)
        elif isinstance(layer, FlattenLayer):
            g = g.reshape(cache)
    return grads


def _validate_mask(spec: ModelSpec, layer_mask: LayerMask) -> Tuple[int, ...]:
    mask = tuple(sorted(set(int(i) for i in layer_mask)))
    n_layers = len(spec.parametric_layers)
    for i in mask:
        if not 0 <= i < n_layers:
            raise ValidationException("layer_mask", f"índice {i} fuera de 0..{n_layers - 1}")
    return mask


def forward(
    weights: WeightVector,
    spec: ModelSpec,
    batch: np.ndarray,
    capture: Optional[LayerMask] = None,
) -> Tuple[np.ndarray, List[ActivationMap]]:
    """Probabilidades por clase y, si se pide, un ActivationMap por muestra."""
    infer_shapes(spec)
    _check_weights(weights, spec)
    x = _check_batch(batch, spec)
    params = _unpack(weights.values, _layout(spec))
    logits, pre_activations, _ = _run_forward(params, spec, x, keep_cache=False)
    probs = _softmax(logits)
    if capture is None:
        return probs, []
    mask = _validate_mask(spec, capture)
    matrix = _concat_activations(pre_activations, mask, x.shape[0])
    maps = [ActivationMap(matrix[i], i, mask) for i in range(x.shape[0])]
    return probs, maps


def _concat_activations(pre_activations, mask: Tuple[int, ...], n: int) -> np.ndarray:
    if not mask:
        return np.zeros((n, 0))
    return np.concatenate([pre_activations[i].reshape(n, -1) for i in mask], axis=1)


def activation_matrix(weights: WeightVector, spec: ModelSpec, batch: np.ndarray, layer_mask: LayerMask) -> np.ndarray:
    """Mapas de activación apilados (n_muestras, dim) para las capas de la máscara."""
    infer_shapes(spec)
    _check_weights(weights, spec)
    x = _check_batch(batch, spec)
    mask = _validate_mask(spec, layer_mask)
    params = _unpack(weights.values, _layout(spec))
    _, pre_activations, _ = _run_forward(params, spec, x, keep_cache=False)
    return _concat_activations(pre_activations, mask, x.shape[0])


def _loss_and_flat_gradient(values: np.ndarray, spec: ModelSpec, layout, x: np.ndarray, y: np.ndarray):
    params = _unpack(values, layout)
    logits, _, caches = _run_forward(params, spec, x, keep_cache=True)
    n = x.shape[0]
    log_probs = _log_softmax(logits)
    loss = float(-log_probs[np.arange(n), y].mean())
    grad_logits = np.exp(log_probs)
    grad_logits[np.arange(n), y] -= 1.0
    grad_logits /= n
    grads = _run_backward(params, spec, caches, grad_logits)
    flat = np.empty_like(values)
    for entry, grad in zip(layout, grads):
        for name, (sl, _) in entry.items():
            flat[sl] = grad[name].ravel()
    return loss, flat


def loss_and_gradient(
    weights: WeightVector,
    spec: ModelSpec,
    x: np.ndarray,
    y: np.ndarray,
) -> Tuple[float, WeightVector]:
    """Entropía cruzada media y su gradiente respecto a todos los pesos."""
    infer_shapes(spec)
    _check_weights(weights, spec)
    x = _check_batch(x, spec)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise EmptyDatasetException("loss_and_gradient")
    loss, flat = _loss_and_flat_gradient(weights.values, spec, _layout(spec), x, y)
    return loss, WeightVector(flat)


# =============================================================================
# TRAINING AND EVALUATION
# =============================================================================

def train_local(
    weights: WeightVector,
    spec: ModelSpec,
    dataset: LabeledDataset,
    epochs: int,
    lr: float,
    batch_size: int,
    grad_mask: Optional[np.ndarray] = None,
    seed: int = 0,
    start_epoch: int = 0,
) -> WeightVector:
    """SGD por mini-lotes sobre entropía cruzada; las coordenadas con máscara 0 no cambian."""
    if len(dataset) == 0:
        raise EmptyDatasetException("train_local")
    if lr <= 0:
        raise ValidationException("lr", "debe ser > 0")
    if batch_size < 1:
        raise ValidationException("batch_size", "debe ser >= 1")
    infer_shapes(spec)
    _check_weights(weights, spec)
    x_all = _check_batch(dataset.images, spec)
    y_all = dataset.labels

    layout = _layout(spec)
    values = weights.values.copy()
    mask = None
    if grad_mask is not None:
        mask = np.asarray(grad_mask, dtype=np.float64)
        if mask.shape != values.shape:
            raise LengthMismatchException(values.shape[0], mask.shape[0], "máscara de gradiente")

    n = len(dataset)
    for epoch in range(start_epoch, start_epoch + epochs):
        order = derive_rng(seed, epoch).permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, grad = _loss_and_flat_gradient(values, spec, layout, x_all[idx], y_all[idx])
            if mask is not None:
                grad = grad * mask
            values -= lr * grad
    return WeightVector(values)


def predict(weights: WeightVector, spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Clase predicha por muestra (empates hacia el índice más bajo)."""
    infer_shapes(spec)
    _check_weights(weights, spec)
    x = _check_batch(x, spec)
    params = _unpack(weights.values, _layout(spec))
    predictions = []
    for start in range(0, x.shape[0], EVAL_CHUNK):
        logits, _, _ = _run_forward(params, spec, x[start:start + EVAL_CHUNK], keep_cache=False)
        predictions.append(_softmax(logits).argmax(axis=1))
    if not predictions:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(predictions)


def evaluate(weights: WeightVector, spec: ModelSpec, dataset: LabeledDataset) -> float:
    """Precisión (fracción de aciertos) sobre el conjunto dado."""
    if len(dataset) == 0:
        raise EmptyDatasetException("evaluate")
    predictions = predict(weights, spec, dataset.images)
    return float(np.mean(predictions == dataset.labels))
