"""Minimal sequential CNN engine: specs, forward/backward passes and SGD training."""

from .engine import (
    ActivationCache,
    backward,
    backward_to_layer,
    cross_entropy,
    evaluate,
    forward,
    init_weights,
    layer_gradients,
    loss_and_grads,
    predict,
    sgd_step,
    softmax,
)
from .rng import SplitMix64
from .spec import (
    LayerSpec,
    NetworkSpec,
    ShapeError,
    builtin_spec,
    count_params,
    infer_shapes,
    spatial_layers,
)
from .train import TrainConfig, load_weights, save_weights, train

__all__ = [
    "ActivationCache", "LayerSpec", "NetworkSpec", "ShapeError", "SplitMix64", "TrainConfig",
    "backward", "backward_to_layer", "builtin_spec", "count_params", "cross_entropy", "evaluate",
    "forward", "infer_shapes", "init_weights", "layer_gradients", "load_weights", "loss_and_grads",
    "predict", "save_weights", "sgd_step", "softmax", "spatial_layers", "train",
]
