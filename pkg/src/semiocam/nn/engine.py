"""Forward pass, backpropagation and SGD for sequential conv nets in numpy.

Weights are a flat dict keyed ``"<layer>.weight"`` / ``"<layer>.bias"``
(conv kernels are (out, in, k, k), linear matrices are (out, in)). The storage
dtype of the weights (float32 or float64) sets the precision of a pass; matrix
products always accumulate in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .rng import SplitMix64
from .spec import NetworkSpec, ShapeError

Weights = dict  # "<layer>.weight" / "<layer>.bias" -> ndarray


@dataclass
class ActivationCache:
    """Input and every layer output of one forward pass (batch dim kept)."""

    input: np.ndarray
    names: list[str]
    outputs: list[np.ndarray]
    aux: list = field(default_factory=list, repr=False)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.outputs[self.names.index(name)]
        except ValueError:
            raise KeyError(f"unknown layer {name!r}") from None


def init_weights(spec: NetworkSpec, rng: SplitMix64, dtype=np.float32) -> Weights:
    """Uniform in +-sqrt(6 / fan_in), layer by layer in network order; zero biases."""
    weights = {}
    for layer in spec.layers:
        if layer.kind == "conv":
            shape = (layer.out_channels, layer.in_channels, layer.kernel, layer.kernel)
            fan_in = layer.in_channels * layer.kernel ** 2
            out = layer.out_channels
        elif layer.kind == "linear":
            shape = (layer.out_features, layer.in_features)
            fan_in = layer.in_features
            out = layer.out_features
        else:
            continue
        bound = np.sqrt(6.0 / fan_in)
        draws = rng.uniform(-bound, bound, int(np.prod(shape)))
        weights[f"{layer.name}.weight"] = draws.reshape(shape).astype(dtype)
        weights[f"{layer.name}.bias"] = np.zeros(out, dtype=dtype)
    return weights


def check_weights(spec: NetworkSpec, weights: Weights) -> None:
    for layer in spec.layers:
        if layer.kind == "conv":
            want = (layer.out_channels, layer.in_channels, layer.kernel, layer.kernel)
            bias = layer.out_channels
        elif layer.kind == "linear":
            want = (layer.out_features, layer.in_features)
            bias = layer.out_features
        else:
            continue
        for key, shape in ((f"{layer.name}.weight", want), (f"{layer.name}.bias", (bias,))):
            if key not in weights:
                raise ShapeError(f"missing parameter {key}")
            if weights[key].shape != shape:
                raise ShapeError(f"{key}: shape {weights[key].shape} != {shape}")


def _dtype(weights: Weights):
    for v in weights.values():
        return v.dtype
    return np.dtype(np.float32)


# -- layer kernels -------------------------------------------------------------

def _im2col(x, k, stride):
    """(N*ho*wo, C*k*k) float64 patches of an already padded (N, C, H, W) input."""
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, ho, wo = win.shape[:4]
    cols = np.empty((n, ho, wo, c, k, k))
    cols[...] = win.transpose(0, 2, 3, 1, 4, 5)
    return cols.reshape(n * ho * wo, c * k * k), (n, ho, wo)


def _correlate(x, w, stride=1):
    """Valid cross-correlation of a padded input with (O, C, k, k) kernels as one GEMM."""
    out_ch, _, k, _ = w.shape
    cols, (n, ho, wo) = _im2col(x, k, stride)
    out = cols @ w.reshape(out_ch, -1).T.astype(np.float64)
    return out.reshape(n, ho, wo, out_ch).transpose(0, 3, 1, 2), cols


def conv_forward(x, w, b, stride=1, pad=0):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    out, cols = _correlate(xp, w, stride)
    out = out + b.astype(np.float64)[:, None, None]
    return np.ascontiguousarray(out, dtype=x.dtype), cols


def conv_backward(dout, x_shape, cols, w, stride=1, pad=0, need_dx=True, need_dw=True):
    n, c, h, wd = x_shape
    out_ch, _, k, _ = w.shape
    ho, wo = dout.shape[2:]
    dout = np.asarray(dout, dtype=np.float64)
    dw = db = dx = None
    if need_dw:
        dmat = dout.transpose(0, 2, 3, 1).reshape(-1, out_ch)
        dw = (dmat.T @ cols).reshape(w.shape)
        db = dout.sum(axis=(0, 2, 3))
    if need_dx:
        # input gradient = full correlation of the (stride-dilated) output gradient
        # with the flipped, channel-swapped kernels
        hd, wdd = (ho - 1) * stride + 1, (wo - 1) * stride + 1
        spread = np.zeros((n, out_ch, hd + 2 * (k - 1), wdd + 2 * (k - 1)))
        spread[:, :, k - 1:k - 1 + hd:stride, k - 1:k - 1 + wdd:stride] = dout
        full, _ = _correlate(spread, w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
        dxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad))
        dxp[:, :, :full.shape[2], :full.shape[3]] = full
        dx = dxp[:, :, pad:pad + h, pad:pad + wd]
    return dx, dw, db


def maxpool_forward(x, k, stride):
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    flat = win.reshape(win.shape[:4] + (k * k,))
    # argmax picks the first maximum in row-major window order
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), arg


def maxpool_backward(dout, x_shape, arg, k, stride):
    ho, wo = dout.shape[2:]
    dx = np.zeros(x_shape, dtype=np.float64)
    for idx in range(k * k):
        i, j = divmod(idx, k)
        dx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += np.where(arg == idx, dout, 0.0)
    return dx


# -- network passes ------------------------------------------------------------

def forward(spec: NetworkSpec, weights: Weights, x) -> tuple[np.ndarray, ActivationCache]:
    """Run the network on ``x`` ((C, H, W) or (N, C, H, W)); returns (logits, cache).

    A single image gives logits of shape (K,); a batch gives (N, K).
    """
    dtype = _dtype(weights)
    x = np.asarray(x)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4 or tuple(x.shape[1:]) != spec.input_shape:
        raise ShapeError(f"input shape {x.shape} does not match {spec.input_shape}")
    x = np.ascontiguousarray(x, dtype=dtype)
    cache = ActivationCache(input=x, names=[], outputs=[])
    h = x
    for layer in spec.layers:
        aux = None
        if layer.kind == "conv":
            h, aux = conv_forward(h, weights[f"{layer.name}.weight"], weights[f"{layer.name}.bias"],
                                  layer.stride, layer.padding)
        elif layer.kind == "relu":
            h = np.maximum(h, 0)
        elif layer.kind == "maxpool":
            h, aux = maxpool_forward(h, layer.kernel, layer.stride)
        elif layer.kind == "flatten":
            h = h.reshape(h.shape[0], -1)
        elif layer.kind == "linear":
            w = weights[f"{layer.name}.weight"]
            b = weights[f"{layer.name}.bias"]
            h = (h.astype(np.float64) @ w.T.astype(np.float64) + b).astype(dtype)
        cache.names.append(layer.name)
        cache.outputs.append(h)
        cache.aux.append(aux)
    return (h[0] if single else h), cache


def backward(spec: NetworkSpec, weights: Weights, cache: ActivationCache, dlogits,
             param_grads: bool = True, stop_at: str | None = None, input_grad: bool = False):
    """Backpropagate ``dlogits`` through the cached pass.

    Returns ``(output_grads, weight_grads)``: gradients w.r.t. every layer output
    at or after ``stop_at`` (keyed by layer name; the network input under
    ``"input"`` when ``input_grad``) and, if requested, w.r.t. every parameter.
    All gradients are float64.
    """
    g = np.asarray(dlogits, dtype=np.float64)
    if g.ndim == 1:
        g = g[None]
    out_grads = {}
    grads = {}
    stop = spec.index(stop_at) if stop_at is not None else 0
    for i in range(len(spec.layers) - 1, stop - 1, -1):
        layer = spec.layers[i]
        out_grads[layer.name] = g
        if i == stop and not (param_grads or input_grad):
            break
        x_in = cache.outputs[i - 1] if i > 0 else cache.input
        if layer.kind == "conv":
            w = weights[f"{layer.name}.weight"]
            g, dw, db = conv_backward(g, x_in.shape, cache.aux[i], w, layer.stride, layer.padding,
                                      need_dx=i > stop or input_grad, need_dw=param_grads)
            if param_grads:
                grads[f"{layer.name}.weight"] = dw
                grads[f"{layer.name}.bias"] = db
        elif layer.kind == "relu":
            g = np.where(cache.outputs[i] > 0, g, 0.0)
        elif layer.kind == "maxpool":
            g = maxpool_backward(g, x_in.shape, cache.aux[i], layer.kernel, layer.stride)
        elif layer.kind == "flatten":
            g = g.reshape(x_in.shape)
        elif layer.kind == "linear":
            w = weights[f"{layer.name}.weight"].astype(np.float64)
            if param_grads:
                grads[f"{layer.name}.weight"] = g.T @ x_in.astype(np.float64)
                grads[f"{layer.name}.bias"] = g.sum(axis=0)
            g = g @ w
    if input_grad and stop == 0:
        out_grads["input"] = g
    return out_grads, grads


def _class_seed(spec: NetworkSpec, cache: ActivationCache, class_index) -> np.ndarray:
    n = cache.outputs[-1].shape[0]
    classes = np.broadcast_to(np.asarray(class_index, dtype=np.int64), (n,))
    if np.any(classes < 0) or np.any(classes >= spec.class_count):
        raise ValueError(f"class index {class_index} out of range [0, {spec.class_count})")
    seed = np.zeros((n, spec.class_count))
    seed[np.arange(n), classes] = 1.0
    return seed


def backward_to_layer(spec: NetworkSpec, weights: Weights, cache: ActivationCache,
                      class_index, layer_name: str) -> np.ndarray:
    """d(logit of ``class_index``) / d(output of ``layer_name``), same shape as that output."""
    spec.index(layer_name)
    seed = _class_seed(spec, cache, class_index)
    out_grads, _ = backward(spec, weights, cache, seed, param_grads=False, stop_at=layer_name)
    return out_grads[layer_name]


def layer_gradients(spec: NetworkSpec, weights: Weights, cache: ActivationCache,
                    class_index) -> dict[str, np.ndarray]:
    """Class-logit gradients w.r.t. every layer output from one backward sweep."""
    seed = _class_seed(spec, cache, class_index)
    out_grads, _ = backward(spec, weights, cache, seed, param_grads=False,
                            stop_at=spec.layers[0].name)
    return out_grads


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, labels) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    z = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = z.shape
    if np.any(labels < 0) or np.any(labels >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.sum(logsum - shifted[rows, labels]) / n)
    d = np.exp(shifted - logsum[:, None])
    d[rows, labels] -= 1.0
    return loss, d / n


def loss_and_grads(spec: NetworkSpec, weights: Weights, batch, labels) -> tuple[float, dict]:
    batch = np.asarray(batch)
    labels = np.asarray(labels)
    if batch.ndim != 4 or batch.shape[0] != len(labels):
        raise ValueError(f"batch {batch.shape} and {len(labels)} labels do not match")
    logits, cache = forward(spec, weights, batch)
    loss, dlogits = cross_entropy(logits, labels)
    _, grads = backward(spec, weights, cache, dlogits)
    return loss, grads


def sgd_step(weights: Weights, grads: dict, learning_rate: float) -> Weights:
    """Plain SGD: ``w - lr * g`` for every parameter, keeping the storage dtype."""
    new = {}
    for key, w in weights.items():
        g = grads[key]
        if g.shape != w.shape:
            raise ShapeError(f"{key}: gradient shape {g.shape} != {w.shape}")
        new[key] = (w.astype(np.float64) - learning_rate * g).astype(w.dtype)
    return new


def predict(spec: NetworkSpec, weights: Weights, images, batch_size: int = 256) -> np.ndarray:
    """Argmax class per image; ties go to the lowest class index."""
    preds = []
    for start in range(0, len(images), batch_size):
        logits, _ = forward(spec, weights, images[start:start + batch_size])
        preds.append(np.argmax(logits, axis=1))
    return np.concatenate(preds)


def evaluate(spec: NetworkSpec, weights: Weights, dataset, batch_size: int = 256) -> float:
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    preds = predict(spec, weights, dataset.images, batch_size)
    return float(np.mean(preds == np.asarray(dataset.labels)))
