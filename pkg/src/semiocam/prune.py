"""Entropy-guided greedy layer removal.

Each round trains the current architecture, profiles saliency entropy on the
test split, deletes the deepest conv layer whose AME does not drop, and
retrains from a fresh seeded init. The loop stops when accuracy falls below
the baseline by more than the tolerance (that removal is rolled back), when no
layer qualifies, or after ``max_removals`` rounds.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

from .nn.engine import evaluate
from .nn.spec import NetworkSpec, ShapeError, count_params, infer_shapes, step_shape
from .nn.train import TrainConfig, train
from .profiler import FLAT_THRESHOLD, EntropyProfile, dataset_profile
from .tensor_io import Dataset

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PruneConfig:
    accuracy_tolerance: float = 0.01
    max_removals: int = 8
    protected_prefix: int = 2
    flat_threshold: float = FLAT_THRESHOLD
    train: TrainConfig = field(default_factory=TrainConfig)
    class_policy: str = "label"
    profile_images: int | None = None  # first N test images used for profiling; None = all

    def __post_init__(self):
        if not 0 < self.accuracy_tolerance < 1:
            raise ValueError("accuracy_tolerance must lie in (0, 1)")
        if self.protected_prefix < 0 or self.max_removals < 0:
            raise ValueError("protected_prefix and max_removals must be >= 0")


@dataclass(frozen=True)
class PruneIteration:
    round: int
    removed_layer: str
    accuracy_before: float
    accuracy_after: float
    profile: EntropyProfile
    spec: NetworkSpec
    params: int
    accepted: bool

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "removed_layer": self.removed_layer,
            "accuracy_before": self.accuracy_before,
            "accuracy_after": self.accuracy_after,
            "accepted": self.accepted,
            "params": self.params,
            "profile": self.profile.to_dict(),
            "spec": self.spec.to_dict(),
        }


@dataclass(frozen=True)
class PruneReport:
    baseline_accuracy: float
    baseline_params: int
    iterations: list[PruneIteration]
    final_spec: NetworkSpec
    final_accuracy: float
    stop_reason: str  # tolerance_exceeded | no_candidate | max_removals

    @property
    def removed_layers(self) -> list[str]:
        return [it.removed_layer for it in self.iterations if it.accepted]

    def to_dict(self) -> dict:
        return {
            "baseline_accuracy": self.baseline_accuracy,
            "baseline_params": self.baseline_params,
            "final_accuracy": self.final_accuracy,
            "final_params": count_params(self.final_spec),
            "stop_reason": self.stop_reason,
            "removed_layers": self.removed_layers,
            "iterations": [it.to_dict() for it in self.iterations],
            "final_spec": self.final_spec.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _conv_names(spec: NetworkSpec) -> list[str]:
    return [layer.name for layer in spec.layers if layer.kind == "conv"]


def remove_layer(spec: NetworkSpec, layer_name: str) -> NetworkSpec:
    """Drop a conv layer (and the relu right after it), then re-chain sizes.

    Later convs take the channel count that now reaches them and the first
    linear after a flatten takes the new flattened size.
    """
    idx = spec.index(layer_name)
    if spec.layers[idx].kind != "conv":
        raise ValueError(f"{layer_name} is a {spec.layers[idx].kind} layer; only conv layers are removable")
    drop = {idx}
    if idx + 1 < len(spec.layers) and spec.layers[idx + 1].kind == "relu":
        drop.add(idx + 1)
    shape = spec.input_shape
    layers = []
    try:
        for i, layer in enumerate(spec.layers):
            if i in drop:
                continue
            if layer.kind == "conv" and len(shape) == 3:
                layer = replace(layer, in_channels=shape[0])
            elif layer.kind == "linear" and len(shape) == 1:
                layer = replace(layer, in_features=shape[0])
            shape = step_shape(layer, shape)
            layers.append(layer)
        new = spec.with_layers(layers)
        infer_shapes(new)
    except ShapeError as exc:
        raise ShapeError(f"removing {layer_name} leaves no legal chain: {exc}") from None
    return new


def select_removal_candidate(profile: EntropyProfile, spec: NetworkSpec,
                             config: PruneConfig) -> str | None:
    """Deepest unprotected conv whose AME does not drop versus the previous profiled layer.

    A drop counts only if it exceeds ``flat_threshold``. Layers whose removal
    would not chain or would not shrink the parameter count are skipped.
    """
    spatial = [layer.name for layer, s in zip(spec.layers, infer_shapes(spec)) if len(s) == 3]
    if profile.layers != spatial:
        raise ValueError(
            f"profile layers {profile.layers} do not match the spec's spatial layers {spatial}"
        )
    protected = set(_conv_names(spec)[:config.protected_prefix])
    params = count_params(spec)
    rows = profile.rows
    for r in range(len(rows) - 1, 0, -1):
        name = rows[r].layer
        if spec.layer(name).kind != "conv" or name in protected:
            continue
        if rows[r].ame - rows[r - 1].ame < -config.flat_threshold:
            continue
        try:
            smaller = count_params(remove_layer(spec, name)) < params
        except ShapeError:
            continue
        if smaller:
            return name
    return None


def _profile_set(test: Dataset, config: PruneConfig) -> Dataset:
    if config.profile_images is None or config.profile_images >= len(test):
        return test
    return test.subset(range(config.profile_images))


def greedy_prune(spec: NetworkSpec, train_set: Dataset, test_set: Dataset,
                 config: PruneConfig, threads: int = 1) -> PruneReport:
    weights, _ = train(spec, train_set, None, config.train)
    baseline = evaluate(spec, weights, test_set)
    log.info("baseline accuracy %.4f with %d params", baseline, count_params(spec))
    current, current_acc = spec, baseline
    iterations: list[PruneIteration] = []
    stop = "max_removals"
    profile_set = _profile_set(test_set, config)
    for rnd in range(1, config.max_removals + 1):
        profile = dataset_profile(current, weights, profile_set, config.class_policy, threads=threads)
        name = select_removal_candidate(profile, current, config)
        if name is None:
            stop = "no_candidate"
            break
        candidate = remove_layer(current, name)
        new_weights, _ = train(candidate, train_set, None, config.train)
        acc = evaluate(candidate, new_weights, test_set)
        accepted = acc >= baseline - config.accuracy_tolerance
        log.info("round %d: removed %s, accuracy %.4f -> %.4f (%s)", rnd, name, current_acc, acc,
                 "kept" if accepted else "rolled back")
        iterations.append(PruneIteration(rnd, name, current_acc, acc, profile, candidate,
                                         count_params(candidate), accepted))
        if not accepted:
            stop = "tolerance_exceeded"
            break
        current, weights, current_acc = candidate, new_weights, acc
    return PruneReport(baseline, count_params(spec), iterations, current, current_acc, stop)
