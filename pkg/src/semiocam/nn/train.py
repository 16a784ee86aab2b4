"""Deterministic minibatch SGD training and weight-directory serialization."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..tensor_io import Dataset, load_npy, save_npy
from .engine import Weights, check_weights, evaluate, init_weights, loss_and_grads, sgd_step
from .rng import SplitMix64
from .spec import NetworkSpec, infer_shapes

log = logging.getLogger(__name__)

PRECISIONS = {"float32": np.float32, "float64": np.float64}


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    precision: str = "float32"

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {sorted(PRECISIONS)}")


def train(spec: NetworkSpec, train_set: Dataset, test_set: Dataset | None,
          config: TrainConfig, weights: Weights | None = None) -> tuple[Weights, list[dict]]:
    """Train from a seeded init (or ``weights``); returns final weights and a per-epoch log.

    The same SplitMix64 stream seeds the init and then every epoch's shuffle, so
    (spec, data, config) fully determines the result.
    """
    infer_shapes(spec)
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    if np.any(train_set.labels >= spec.class_count) or np.any(train_set.labels < 0):
        raise ValueError(f"training labels must lie in [0, {spec.class_count})")
    rng = SplitMix64(config.seed)
    dtype = PRECISIONS[config.precision]
    fresh = init_weights(spec, rng, dtype)
    if weights is None:
        weights = fresh
    else:
        check_weights(spec, weights)
        weights = {k: v.astype(dtype) for k, v in weights.items()}
    images = train_set.images.astype(dtype, copy=False)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_set))
        total, seen = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_grads(spec, weights, images[idx], train_set.labels[idx])
            weights = sgd_step(weights, grads, config.learning_rate)
            total += loss * len(idx)
            seen += len(idx)
        record = {"epoch": epoch + 1, "loss": total / seen}
        if test_set is not None and len(test_set):
            record["test_accuracy"] = evaluate(spec, weights, test_set)
        log.info("epoch %d loss %.4f acc %s", epoch + 1, record["loss"], record.get("test_accuracy"))
        history.append(record)
    return weights, history


def save_weights(directory, spec: NetworkSpec, weights: Weights) -> None:
    """Write ``<layer>.weight.npy`` / ``<layer>.bias.npy`` plus ``spec.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for key in sorted(weights):
        save_npy(directory / f"{key}.npy", weights[key])
    (directory / "spec.json").write_text(spec.to_json())


def load_weights(directory, spec: NetworkSpec | None = None) -> tuple[NetworkSpec, Weights]:
    directory = Path(directory)
    if spec is None:
        spec = NetworkSpec.load(directory / "spec.json")
    weights = {}
    for layer in spec.layers:
        if layer.has_params:
            for part in ("weight", "bias"):
                key = f"{layer.name}.{part}"
                path = directory / f"{key}.npy"
                if not path.is_file():
                    raise FileNotFoundError(f"missing weight file {path}")
                weights[key] = load_npy(path)
    check_weights(spec, weights)
    return spec, weights


def write_history(path, history) -> None:
    Path(path).write_text(json.dumps(history, indent=2) + "\n")
