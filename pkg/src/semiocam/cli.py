"""``semiocam`` command line: train, saliency, profile, prune, image-entropy.

Exit codes: 0 success, 1 usage error, 2 data or format error. Any flag may also
come from ``--config FILE.json`` (keys use the flag names, dashes or
underscores); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import entropy, profiler
from .gradcam import gradcam
from .nn.spec import NetworkSpec, builtin_spec
from .nn.train import TrainConfig, load_weights, save_weights, train, write_history
from .palettes import get_palette
from .prune import PruneConfig, greedy_prune
from .tensor_io import FormatError, class_subset, load_cifar10_dir, load_npy, read_pgm

log = logging.getLogger("semiocam")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


DEFAULTS = {
    "train": {"epochs": 20, "lr": 0.01, "batch": 32, "seed": 0, "precision": "float32"},
    "saliency": {"class_": "auto", "palette": "plasma", "scale": 1},
    "profile": {"classes": "label", "threads": 1},
    "prune": {"tolerance": 0.01, "max_removals": 8, "protect": 2, "seed": 0, "epochs": 20,
              "lr": 0.01, "batch": 32, "classes": "label", "threads": 1,
              "flat_threshold": profiler.FLAT_THRESHOLD},
    "image-entropy": {},
}
REQUIRED = {
    "train": ("spec", "data", "out"),
    "saliency": ("weights", "image", "layer", "out"),
    "profile": ("weights", "data", "out"),
    "prune": ("spec", "data", "out"),
    "image-entropy": ("image",),
}


def _data_flags(p):
    p.add_argument("--data", help="directory with CIFAR-10 binary batches")
    p.add_argument("--labels", help="comma-separated class subset, e.g. 0,6")
    p.add_argument("--limit", type=int, help="max training images per class")
    p.add_argument("--test-limit", type=int, help="max test images per class")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semiocam", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="train a network with seeded SGD")
    p.add_argument("--config")
    p.add_argument("--spec", help="spec JSON path or built-in name")
    _data_flags(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--precision", choices=["float32", "float64"])
    p.add_argument("--out", help="weights directory")

    p = sub.add_parser("saliency", help="render the Grad-CAM map of one layer")
    p.add_argument("--config")
    p.add_argument("--spec")
    p.add_argument("--weights")
    p.add_argument("--image", help="PGM or NPY image")
    p.add_argument("--layer")
    p.add_argument("--class", dest="class_", help="class index or 'auto'")
    p.add_argument("--palette", choices=["plasma", "gray"])
    p.add_argument("--scale", type=int)
    p.add_argument("--out", help="output PPM")

    p = sub.add_parser("profile", help="mean saliency entropy per layer over a dataset")
    p.add_argument("--config")
    p.add_argument("--spec")
    p.add_argument("--weights")
    _data_flags(p)
    p.add_argument("--classes", help="label | auto | <class index>")
    p.add_argument("--sde", action="store_true", default=None)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output CSV")
    p.add_argument("--figure", help="optional PNG of the profile")

    p = sub.add_parser("prune", help="entropy-guided greedy layer removal")
    p.add_argument("--config")
    p.add_argument("--spec")
    _data_flags(p)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--max-removals", type=int)
    p.add_argument("--protect", type=int)
    p.add_argument("--flat-threshold", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--classes", help="class policy for profiling")
    p.add_argument("--profile-images", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="report JSON")
    p.add_argument("--figure", help="optional PNG of accuracy per removal")

    p = sub.add_parser("image-entropy", help="H(0) and AME (optionally SDE) of a PGM")
    p.add_argument("--config")
    p.add_argument("--image")
    p.add_argument("--sde", action="store_true", default=None)
    return parser


def _resolve(args) -> argparse.Namespace:
    values = dict(vars(args))
    if args.config:
        try:
            conf = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise FileNotFoundError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(conf, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in conf.items():
            attr = key.replace("-", "_")
            if attr == "class":
                attr = "class_"
            if attr not in values:
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            if values[attr] is None:
                values[attr] = value
    for key, value in DEFAULTS[args.command].items():
        if values.get(key) is None:
            values[key] = value
    missing = [f"--{k.replace('_', '-')}" for k in REQUIRED[args.command] if values.get(k) is None]
    if missing:
        raise UsageError(f"{args.command}: missing required {', '.join(missing)}")
    return argparse.Namespace(**values)


def _load_spec(ref) -> NetworkSpec:
    path = Path(ref)
    if path.is_file():
        return NetworkSpec.load(path)
    try:
        return builtin_spec(str(ref))
    except KeyError:
        raise FileNotFoundError(f"no spec file or built-in spec named {ref}") from None


def _labels(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _dataset(args, split):
    data = load_cifar10_dir(args.data, split)
    labels = _labels(args.labels)
    per_class = args.limit if split == "train" else args.test_limit
    if labels is not None:
        data = class_subset(data, labels, per_class)
    elif per_class is not None:
        data = class_subset(data, range(10), per_class)
    return data


def _weights(args):
    spec = _load_spec(args.spec) if args.spec else None
    return load_weights(args.weights, spec)


def cmd_train(args) -> int:
    spec = _load_spec(args.spec)
    train_set = _dataset(args, "train")
    test_path = Path(args.data) / "test_batch.bin"
    test_set = _dataset(args, "test") if test_path.is_file() else None
    config = TrainConfig(args.lr, args.epochs, args.batch, args.seed, args.precision)
    weights, history = train(spec, train_set, test_set, config)
    save_weights(args.out, spec, weights)
    write_history(Path(args.out) / "history.json", history)
    last = history[-1]
    print(f"epochs={len(history)} loss={last['loss']:.6f}"
          + (f" test_accuracy={last['test_accuracy']:.6f}" if "test_accuracy" in last else ""))
    return 0


def _load_image(path, spec: NetworkSpec) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".npy":
        img = load_npy(path)
        if img.ndim == 4 and img.shape[0] == 1:
            img = img[0]
    else:
        gray = read_pgm(path.read_bytes()).astype(np.float32) / np.float32(255)
        img = np.repeat(gray[None], spec.input_shape[0], axis=0)
    if tuple(img.shape) != spec.input_shape:
        raise FormatError(f"image shape {tuple(img.shape)} does not match network input {spec.input_shape}")
    return img


def cmd_saliency(args) -> int:
    spec, weights = _weights(args)
    image = _load_image(args.image, spec)
    cls = args.class_ if args.class_ == "auto" else int(args.class_)
    sal = gradcam(spec, weights, image, cls, args.layer)
    Path(args.out).write_bytes(profiler.render_heatmap(sal.map, get_palette(args.palette), args.scale))
    h, w = sal.map.shape
    ame = entropy.aura_matrix_entropy(sal.map) if min(h, w) >= 2 else float("nan")
    print(f"layer={sal.layer_name} class={sal.class_index} size={w}x{h} "
          f"h0={entropy.univariate_entropy(sal.map):.6f} ame={ame:.6f}")
    return 0


def cmd_profile(args) -> int:
    spec, weights = _weights(args)
    data = _dataset(args, "test")
    prof = profiler.dataset_profile(spec, weights, data, args.classes, bool(args.sde), args.threads)
    Path(args.out).write_bytes(profiler.write_profile_csv(prof))
    if args.figure:
        from .plotting import plot_profile
        plot_profile(prof, args.figure)
    for ev in profiler.superization_events(prof) if len(prof.rows) > 1 else []:
        log.info("%s %+.4f %s", ev.layer, ev.delta_ame, ev.kind)
    return 0


def cmd_prune(args) -> int:
    spec = _load_spec(args.spec)
    train_set = _dataset(args, "train")
    test_set = _dataset(args, "test")
    config = PruneConfig(
        accuracy_tolerance=args.tolerance,
        max_removals=args.max_removals,
        protected_prefix=args.protect,
        flat_threshold=args.flat_threshold,
        train=TrainConfig(args.lr, args.epochs, args.batch, args.seed),
        class_policy=args.classes,
        profile_images=args.profile_images,
    )
    report = greedy_prune(spec, train_set, test_set, config, threads=args.threads)
    Path(args.out).write_text(report.to_json())
    if args.figure:
        from .plotting import plot_prune
        plot_prune(report, args.figure, args.tolerance)
    print(f"baseline={report.baseline_accuracy:.6f} final={report.final_accuracy:.6f} "
          f"removed={','.join(report.removed_layers) or '-'} stop={report.stop_reason}")
    return 0


def cmd_image_entropy(args) -> int:
    m = read_pgm(Path(args.image).read_bytes())
    line = f"h0={entropy.univariate_entropy(m):.6f} ame={entropy.aura_matrix_entropy(m):.6f}"
    if args.sde:
        line += f" sde={entropy.spatial_disorder_entropy(m):.6f}"
    print(line)
    return 0


COMMANDS = {
    "train": cmd_train,
    "saliency": cmd_saliency,
    "profile": cmd_profile,
    "prune": cmd_prune,
    "image-entropy": cmd_image_entropy,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("semiocam: a subcommand is required")
        args = _resolve(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    except (OSError, ValueError) as exc:
        print(f"semiocam: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"semiocam {args.command}: {msg}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
