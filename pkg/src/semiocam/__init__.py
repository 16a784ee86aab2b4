"""Grad-CAM saliency entropy profiling and entropy-guided layer pruning for small CNNs."""

__version__ = "0.1.0"
