"""Matplotlib figures written next to the CSV/JSON reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .profiler import EntropyProfile, superization_events  # noqa: E402

# fixed metadata keeps PNG bytes reproducible across runs
_META = {"Software": None}


def plot_profile(profile: EntropyProfile, path, title: str | None = None,
                 flat_threshold: float = 0.005) -> None:
    """AME (left axis) and mean H(0) (right axis) per profiled layer; drops marked."""
    names = profile.layers
    xs = range(len(names))
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(names) + 2), 3.2))
    ax.plot(xs, profile.ame(), "o-", color="#6a00a8", label="AME")
    if len(names) > 1:
        for ev in superization_events(profile, flat_threshold):
            if ev.kind == "drop":
                i = names.index(ev.layer)
                ax.axvspan(i - 0.5, i + 0.5, color="#fca636", alpha=0.25, lw=0)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("mean AME")
    ax2 = ax.twinx()
    ax2.plot(xs, [r.h0 for r in profile.rows], "s--", color="#0d0887", alpha=0.5, label="H(0)")
    ax2.set_ylabel("mean H(0) [bits]")
    ax.set_title(title or f"saliency entropy ({profile.rows[0].images if profile.rows else 0} images)")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def plot_prune(report, path, tolerance: float = 0.01) -> None:
    """Test accuracy against the number of removed layers, rolled-back step in red."""
    xs = [0]
    ys = [report.baseline_accuracy]
    labels = ["full"]
    rejected = None
    for it in report.iterations:
        if it.accepted:
            xs.append(len(xs))
            ys.append(it.accuracy_after)
            labels.append(f"-{it.removed_layer}")
        else:
            rejected = (len(xs), it.accuracy_after, f"-{it.removed_layer}")
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(xs, ys, "o-", color="#6a00a8")
    if rejected:
        ax.plot([xs[-1], rejected[0]], [ys[-1], rejected[1]], ":", color="#b12a90")
        ax.plot([rejected[0]], [rejected[1]], "x", color="#b12a90", ms=9)
        labels.append(rejected[2])
    ax.axhline(report.baseline_accuracy - tolerance, color="gray", lw=0.8, ls="--")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("test accuracy")
    ax.set_xlabel("removed layers")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
