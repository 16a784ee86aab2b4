"""Grad-CAM saliency maps for any spatial layer, quantized to 8-bit gray maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import engine
from .nn.spec import NetworkSpec, infer_shapes


@dataclass(frozen=True)
class SaliencyMap:
    map: np.ndarray  # (h, w) uint8 at the layer's own resolution
    layer_name: str
    class_index: int
    raw_min: float
    raw_max: float


def importance_weights(grad) -> np.ndarray:
    """Per-channel spatial mean of a (c, h, w) gradient."""
    g = np.asarray(grad, dtype=np.float64)
    if g.ndim != 3:
        raise ValueError(f"gradient must be (c, h, w), got shape {g.shape}")
    if g.size == 0:
        raise ValueError("empty gradient tensor")
    return g.mean(axis=(1, 2))


def raw_cam(activation, alpha) -> np.ndarray:
    """ReLU of the alpha-weighted sum of the channels of a (c, h, w) activation."""
    a = np.asarray(activation, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if a.ndim != 3 or alpha.shape != (a.shape[0],):
        raise ValueError(f"{alpha.shape[0] if alpha.ndim else 0} weights for activation {a.shape}")
    return np.maximum(np.tensordot(alpha, a, axes=1), 0.0)


def quantize(values) -> tuple[np.ndarray, float, float]:
    """Min-max scale to [0, 255] rounding half up; a constant map becomes all zeros.

    Returns ``(graymap, raw_min, raw_max)``.
    """
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot quantize a map containing NaN or Inf")
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return np.zeros(v.shape, dtype=np.uint8), lo, hi
    g = np.floor(255.0 * (v - lo) / (hi - lo) + 0.5)
    return g.astype(np.uint8), lo, hi


def resolve_class(spec: NetworkSpec, logits, class_index) -> int:
    """``None`` or ``"auto"`` means argmax of the logits (lowest index on ties)."""
    if class_index is None or class_index == "auto":
        return int(np.argmax(logits))
    c = int(class_index)
    if not 0 <= c < spec.class_count:
        raise ValueError(f"class {c} out of range [0, {spec.class_count})")
    return c


def cam_from_pass(activation, gradient, layer_name: str, class_index: int) -> SaliencyMap:
    alpha = importance_weights(gradient)
    g, lo, hi = quantize(raw_cam(activation, alpha))
    return SaliencyMap(g, layer_name, class_index, lo, hi)


def gradcam(spec: NetworkSpec, weights, image, class_index, layer_name: str) -> SaliencyMap:
    """Saliency of ``layer_name`` for one (C, H, W) image and a class (int or "auto")."""
    idx = spec.index(layer_name)
    if len(infer_shapes(spec)[idx]) != 3:
        raise ValueError(f"{layer_name} is not a spatial layer; Grad-CAM needs a (C, H, W) output")
    image = np.asarray(image)
    if image.ndim != 3:
        raise ValueError(f"gradcam takes a single (C, H, W) image, got shape {image.shape}")
    logits, cache = engine.forward(spec, weights, image)
    c = resolve_class(spec, logits, class_index)
    grad = engine.backward_to_layer(spec, weights, cache, c, layer_name)
    return cam_from_pass(cache[layer_name][0], grad[0], layer_name, c)
