"""Declarative sequential network specs, shape inference and parameter counts."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

KINDS = ("conv", "relu", "maxpool", "flatten", "linear")


class ShapeError(ValueError):
    """A spec whose layers do not chain."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    name: str
    in_channels: int | None = None
    out_channels: int | None = None
    kernel: int | None = None
    stride: int | None = None
    padding: int = 0
    in_features: int | None = None
    out_features: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"{self.name}: unknown layer kind {self.kind!r}")
        if self.kind == "conv":
            if self.kernel is None:
                object.__setattr__(self, "kernel", 3)
            if self.stride is None:
                object.__setattr__(self, "stride", 1)
            required = ("in_channels", "out_channels", "kernel", "stride")
        elif self.kind == "maxpool":
            if self.kernel is None:
                object.__setattr__(self, "kernel", 2)
            if self.stride is None:
                object.__setattr__(self, "stride", self.kernel)
            required = ("kernel", "stride")
        elif self.kind == "linear":
            required = ("in_features", "out_features")
        else:
            required = ()
        for attr in required:
            value = getattr(self, attr)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{self.name}: {attr} must be a positive integer, got {value!r}")
        if self.padding < 0:
            raise ValueError(f"{self.name}: padding must be >= 0")

    @property
    def has_params(self) -> bool:
        return self.kind in ("conv", "linear")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "name": self.name}
        if self.kind == "conv":
            d.update({"in": self.in_channels, "out": self.out_channels, "kernel": self.kernel,
                      "stride": self.stride, "padding": self.padding})
        elif self.kind == "maxpool":
            d.update({"kernel": self.kernel, "stride": self.stride})
        elif self.kind == "linear":
            d.update({"in": self.in_features, "out": self.out_features})
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        kind = d.get("kind")
        name = d.get("name")
        if not isinstance(name, str) or not name:
            raise ValueError(f"layer {d!r} needs a non-empty name")
        if kind == "conv":
            return cls(kind, name, in_channels=d.get("in"), out_channels=d.get("out"),
                       kernel=d.get("kernel", 3), stride=d.get("stride", 1),
                       padding=d.get("padding", 0))
        if kind == "maxpool":
            k = d.get("kernel", 2)
            return cls(kind, name, kernel=k, stride=d.get("stride", k))
        if kind == "linear":
            return cls(kind, name, in_features=d.get("in"), out_features=d.get("out"))
        return cls(kind, name)


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    class_count: int

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValueError(f"input_shape must be positive (C, H, W), got {self.input_shape}")
        names = [layer.name for layer in self.layers]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"duplicate layer names: {', '.join(dupes)}")

    def layer(self, name: str) -> LayerSpec:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(f"unknown layer {name!r}")

    def index(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise KeyError(f"unknown layer {name!r}")

    @property
    def names(self) -> list[str]:
        return [layer.name for layer in self.layers]

    def with_layers(self, layers) -> "NetworkSpec":
        return replace(self, layers=tuple(layers))

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "class_count": self.class_count,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        for key in ("input_shape", "class_count", "layers"):
            if key not in d:
                raise ValueError(f"network spec is missing {key!r}")
        if "residual" in d or any("residual" in layer or "skip" in layer for layer in d["layers"]):
            raise ValueError("only sequential networks are supported (no residual connections)")
        spec = cls(tuple(d["input_shape"]), tuple(LayerSpec.from_dict(x) for x in d["layers"]),
                   int(d["class_count"]))
        infer_shapes(spec)
        return spec

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "NetworkSpec":
        return cls.from_json(Path(path).read_text())


def conv_out(size: int, kernel: int, stride: int, padding: int = 0) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def step_shape(layer: LayerSpec, shape: tuple[int, ...]) -> tuple[int, ...]:
    """Output shape (no batch dim) of ``layer`` fed with ``shape``."""
    if layer.kind in ("conv", "maxpool"):
        if len(shape) != 3:
            raise ShapeError(f"{layer.name}: expects a (C, H, W) input, got {shape}")
        c, h, w = shape
        pad = 0
        if layer.kind == "conv":
            if layer.in_channels != c:
                raise ShapeError(f"{layer.name}: in_channels {layer.in_channels} != incoming {c}")
            pad, c = layer.padding, layer.out_channels
        h = conv_out(h, layer.kernel, layer.stride, pad)
        w = conv_out(w, layer.kernel, layer.stride, pad)
        if h < 1 or w < 1:
            raise ShapeError(f"{layer.name}: output spatial size {h}x{w} is empty")
        return (c, h, w)
    if layer.kind == "flatten":
        size = 1
        for d in shape:
            size *= d
        return (size,)
    if layer.kind == "linear":
        if len(shape) != 1:
            raise ShapeError(f"{layer.name}: linear needs a flat input, got {shape} (add a flatten)")
        if layer.in_features != shape[0]:
            raise ShapeError(f"{layer.name}: in_features {layer.in_features} != incoming {shape[0]}")
        return (layer.out_features,)
    return shape


def infer_shapes(spec: NetworkSpec) -> list[tuple[int, ...]]:
    """Per-layer output shapes (without the batch dim); raises ShapeError at the first bad layer."""
    shape: tuple[int, ...] = spec.input_shape
    shapes = []
    for layer in spec.layers:
        shape = step_shape(layer, shape)
        shapes.append(shape)
    if not spec.layers or spec.layers[-1].kind != "linear":
        raise ShapeError("the final layer must be linear")
    if shape != (spec.class_count,):
        raise ShapeError(
            f"{spec.layers[-1].name}: out_features {shape[0]} != class_count {spec.class_count}"
        )
    return shapes


def count_params(spec: NetworkSpec) -> int:
    total = 0
    for layer in spec.layers:
        if layer.kind == "conv":
            total += layer.out_channels * (layer.in_channels * layer.kernel ** 2 + 1)
        elif layer.kind == "linear":
            total += layer.out_features * (layer.in_features + 1)
    return total


def spatial_layers(spec: NetworkSpec) -> list[str]:
    """Names of layers whose output keeps (C, H, W) form, in network order."""
    shapes = infer_shapes(spec)
    return [layer.name for layer, s in zip(spec.layers, shapes) if len(s) == 3]


def builtin_spec(name: str) -> NetworkSpec:
    """Load one of the shipped specs (``custom_net``, ``vgg_small``, ``prune_toy``)."""
    path = Path(__file__).resolve().parent.parent / "specs" / f"{name}.json"
    if not path.is_file():
        raise KeyError(f"no built-in spec named {name!r}")
    return NetworkSpec.load(path)
