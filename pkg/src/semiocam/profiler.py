"""Per-layer saliency entropy profiles, superization events, CSV/JSON output and heatmaps."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import entropy
from .gradcam import cam_from_pass, resolve_class
from .nn import engine
from .nn.spec import NetworkSpec, infer_shapes
from .tensor_io import Dataset, as_graymap, write_image

FLAT_THRESHOLD = 0.005
CSV_HEADER = "layer,index,h0_bits,ame,sde,images"


@dataclass(frozen=True)
class ProfileRow:
    layer: str
    index: int
    h0: float
    ame: float
    sde: float | None
    images: int


@dataclass(frozen=True)
class EntropyProfile:
    rows: list[ProfileRow]
    fingerprint: str = ""
    class_policy: str = "label"

    def __post_init__(self):
        counts = {r.images for r in self.rows}
        if len(counts) > 1:
            raise ValueError("every row of a profile must cover the same images")

    @property
    def layers(self) -> list[str]:
        return [r.layer for r in self.rows]

    def ame(self) -> list[float]:
        return [r.ame for r in self.rows]

    def row(self, layer: str) -> ProfileRow:
        for r in self.rows:
            if r.layer == layer:
                return r
        raise KeyError(layer)

    def to_dict(self) -> dict:
        return {"fingerprint": self.fingerprint, "class_policy": self.class_policy,
                "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "EntropyProfile":
        return cls([ProfileRow(**r) for r in d["rows"]], d.get("fingerprint", ""),
                   d.get("class_policy", "label"))


@dataclass(frozen=True)
class SuperizationEvent:
    layer: str
    delta_ame: float
    kind: str  # "drop", "rise" or "flat"


@dataclass(frozen=True)
class LayerEntropy:
    layer: str
    h0: float
    ame: float
    sde: float | None = None
    saliency: object = field(default=None, repr=False, compare=False)


def _spatial_indices(spec: NetworkSpec) -> list[int]:
    return [i for i, s in enumerate(infer_shapes(spec)) if len(s) == 3]


def layer_profile(spec: NetworkSpec, weights, image, class_index="auto", sde: bool = False,
                  keep_maps: bool = False) -> list[LayerEntropy]:
    """Grad-CAM map entropies of every spatial layer for one image, in network order.

    One forward and one backward sweep serve all layers.
    """
    logits, cache = engine.forward(spec, weights, image)
    c = resolve_class(spec, logits, class_index)
    grads = engine.layer_gradients(spec, weights, cache, c)
    out = []
    for i in _spatial_indices(spec):
        name = spec.layers[i].name
        sal = cam_from_pass(cache.outputs[i][0], grads[name][0], name, c)
        out.append(LayerEntropy(
            name,
            entropy.univariate_entropy(sal.map),
            entropy.aura_matrix_entropy(sal.map),
            entropy.spatial_disorder_entropy(sal.map) if sde else None,
            sal if keep_maps else None,
        ))
    return out


def _class_for(policy, label):
    if policy == "label":
        return int(label)
    if policy in ("auto", "predicted"):
        return "auto"
    return int(policy)


def dataset_profile(spec: NetworkSpec, weights, dataset: Dataset, class_policy="label",
                    sde: bool = False, threads: int = 1) -> EntropyProfile:
    """Per-layer means of H(0), AME (and SDE) over the saliency maps of every image.

    ``class_policy`` is ``"label"`` (ground truth), ``"auto"`` (predicted class) or
    a fixed class index. Means are reduced in ascending image order regardless of
    ``threads``.
    """
    if len(dataset) == 0:
        raise ValueError("cannot profile an empty dataset")
    if class_policy not in ("label", "auto", "predicted"):
        class_policy = str(int(class_policy))

    def one(i):
        return layer_profile(spec, weights, dataset.images[i],
                             _class_for(class_policy, dataset.labels[i]), sde)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            per_image = list(pool.map(one, range(len(dataset))))
    else:
        per_image = [one(i) for i in range(len(dataset))]

    n = len(per_image)
    rows = []
    for j, idx in enumerate(_spatial_indices(spec)):
        col = [p[j] for p in per_image]
        rows.append(ProfileRow(
            layer=spec.layers[idx].name,
            index=idx,
            h0=math.fsum(e.h0 for e in col) / n,
            ame=math.fsum(e.ame for e in col) / n,
            sde=math.fsum(e.sde for e in col) / n if sde else None,
            images=n,
        ))
    return EntropyProfile(rows, spec.fingerprint(), class_policy)


def superization_events(profile: EntropyProfile,
                        flat_threshold: float = FLAT_THRESHOLD) -> list[SuperizationEvent]:
    """AME change from each profiled layer to the next, labelled drop / rise / flat."""
    if len(profile.rows) < 2:
        raise ValueError("need at least two profile rows to find superization events")
    events = []
    for prev, cur in zip(profile.rows, profile.rows[1:]):
        delta = cur.ame - prev.ame
        if abs(delta) <= flat_threshold:
            kind = "flat"
        else:
            kind = "drop" if delta < 0 else "rise"
        events.append(SuperizationEvent(cur.layer, delta, kind))
    return events


def render_heatmap(graymap, palette, scale: int = 1) -> bytes:
    """Palette lookup plus nearest-neighbour upscaling, encoded as binary PPM."""
    g = as_graymap(graymap)
    palette = np.asarray(palette, dtype=np.uint8)
    if palette.shape != (256, 3):
        raise ValueError(f"palette must be (256, 3), got {palette.shape}")
    if int(scale) != scale or scale < 1:
        raise ValueError(f"scale must be a positive integer, got {scale}")
    rgb = palette[g]
    if scale > 1:
        rgb = np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)
    return write_image(rgb, "P6")


def _fmt(v) -> str:
    return "" if v is None else f"{v:.6f}"


def write_profile_csv(profile: EntropyProfile) -> bytes:
    rows = sorted(profile.rows, key=lambda r: r.index)
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(f"{r.layer},{r.index},{_fmt(r.h0)},{_fmt(r.ame)},{_fmt(r.sde)},{r.images}")
    return ("\n".join(lines) + "\n").encode("ascii")


def read_profile_csv(data: bytes) -> EntropyProfile:
    reader = csv.DictReader(io.StringIO(data.decode("ascii")))
    if reader.fieldnames != CSV_HEADER.split(","):
        raise ValueError(f"unexpected profile header {reader.fieldnames}")
    rows = [ProfileRow(r["layer"], int(r["index"]), float(r["h0_bits"]), float(r["ame"]),
                       float(r["sde"]) if r["sde"] else None, int(r["images"])) for r in reader]
    return EntropyProfile(rows)


def profile_json(profile: EntropyProfile) -> str:
    return json.dumps(profile.to_dict(), indent=2) + "\n"
