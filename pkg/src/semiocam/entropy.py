"""Spatial entropy of gray maps: univariate, offset-pair (bivariate), relative, AME and SDE.

All logs are base 2. Pair statistics use only pairs whose both ends fall inside
the map (no wrap-around, no padding).

Because the univariate entropy is taken over the whole map while an offset pair
histogram excludes a border strip, the relative entropy of a finite map can land
slightly outside [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor_io import as_graymap

LEVELS = 256
SDE_MAX_SIZE = 64


@dataclass(frozen=True)
class JointHistogram:
    counts: np.ndarray  # (256, 256) int64, counts[g, g'] for X[i, j] = g, X[i+k, j+l] = g'
    offset: tuple[int, int]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def transpose(self) -> "JointHistogram":
        return JointHistogram(self.counts.T.copy(), (-self.offset[0], -self.offset[1]))


def _entropy_of_counts(counts) -> float:
    c = np.asarray(counts, dtype=np.float64).ravel()
    c = c[c > 0]
    if c.size == 0:
        raise ValueError("entropy of an empty histogram")
    p = c / c.sum()
    # fsum is exactly rounded, so the result ignores the order of the bins;
    # adding 0.0 turns the -0.0 of a single bin into +0.0
    return 0.0 - math.fsum(p * np.log2(p))


def entropy(p) -> float:
    """Shannon entropy in bits of a probability vector (0 log 0 = 0)."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("not a probability distribution")
    nz = p[p > 0]
    return 0.0 - math.fsum(nz * np.log2(nz))


def merge_outcomes(p, i: int, j: int) -> np.ndarray:
    """Fold outcome ``j`` into outcome ``i``; the merged entry sits at ``min(i, j)``."""
    p = np.asarray(p, dtype=np.float64)
    n = len(p)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"indices ({i}, {j}) out of range for {n} outcomes")
    if i == j:
        raise ValueError("cannot merge an outcome with itself")
    lo, hi = min(i, j), max(i, j)
    out = np.delete(p, hi)
    out[lo] = p[i] + p[j]
    return out


def univariate_histogram(graymap) -> np.ndarray:
    return np.bincount(as_graymap(graymap).ravel(), minlength=LEVELS)


def univariate_entropy(graymap) -> float:
    """H(0): entropy of the 256-bin intensity histogram."""
    return _entropy_of_counts(univariate_histogram(graymap))


def _pair_views(m: np.ndarray, k: int, l: int):
    h, w = m.shape
    if abs(k) >= h or abs(l) >= w:
        raise ValueError(f"offset ({k}, {l}) does not fit a {h}x{w} map")
    r0, r1 = max(0, -k), h - max(0, k)
    c0, c1 = max(0, -l), w - max(0, l)
    return m[r0:r1, c0:c1], m[r0 + k:r1 + k, c0 + l:c1 + l]


def joint_histogram(graymap, offset) -> JointHistogram:
    """Counts of (X[i, j], X[i+k, j+l]) over all in-bounds pairs."""
    m = as_graymap(graymap)
    k, l = (int(v) for v in offset)
    a, b = _pair_views(m, k, l)
    codes = a.astype(np.int64).ravel() * LEVELS + b.ravel()
    counts = np.bincount(codes, minlength=LEVELS * LEVELS).reshape(LEVELS, LEVELS)
    return JointHistogram(counts, (k, l))


def bivariate_entropy(hist: JointHistogram) -> float:
    """H(k, l) of a pair histogram."""
    return _entropy_of_counts(hist.counts)


def _pair_entropy(m: np.ndarray, k: int, l: int) -> float:
    a, b = _pair_views(m, k, l)
    codes = a.astype(np.int64).ravel() * LEVELS + b.ravel()
    return _entropy_of_counts(np.bincount(codes))


def _relative(h_pair: float, h0: float) -> float:
    return 0.0 if h0 == 0 else (h_pair - h0) / h0


def relative_entropy(graymap, offset) -> float:
    """H_R(k, l) = (H(k, l) - H(0)) / H(0); defined as 0 for a constant map."""
    m = as_graymap(graymap)
    h0 = univariate_entropy(m)
    if h0 == 0:
        return 0.0
    return _relative(_pair_entropy(m, *offset), h0)


AME_OFFSETS = ((-1, 0), (0, -1), (1, 0), (0, 1))


def aura_matrix_entropy(graymap) -> float:
    """Mean relative entropy over the four nearest-neighbour offsets."""
    m = as_graymap(graymap)
    if m.shape[0] < 2 or m.shape[1] < 2:
        raise ValueError(f"AME needs a map of at least 2x2, got {m.shape[0]}x{m.shape[1]}")
    h0 = univariate_entropy(m)
    if h0 == 0:
        return 0.0
    terms = [_relative(_pair_entropy(m, k, l), h0) for k, l in AME_OFFSETS]
    return math.fsum(terms) / 4


def spatial_disorder_entropy(graymap, max_size: int = SDE_MAX_SIZE) -> float:
    """Pair-count-weighted mean of H_R over every offset that fits the map.

    Offset (a, b) occurs (m - |a|)(n - |b|) times among all ordered pixel pairs,
    which is the weight it gets here. Cost grows as m^2 n^2, hence ``max_size``.
    """
    m = as_graymap(graymap)
    rows, cols = m.shape
    if rows < 2 or cols < 2:
        raise ValueError(f"SDE needs a map of at least 2x2, got {rows}x{cols}")
    if rows > max_size or cols > max_size:
        raise ValueError(
            f"SDE of a {rows}x{cols} map exceeds the {max_size}x{max_size} cap; "
            "use aura_matrix_entropy for large maps or raise max_size"
        )
    h0 = univariate_entropy(m)
    if h0 == 0:
        return 0.0
    terms = []
    den = 0
    for a in range(-(rows - 1), rows):
        for b in range(-(cols - 1), cols):
            weight = (rows - abs(a)) * (cols - abs(b))
            if (a, b) != (0, 0):
                terms.append(weight * _relative(_pair_entropy(m, a, b), h0))
            den += weight
    return math.fsum(terms) / den


def marginal_entropies(hist: JointHistogram) -> tuple[float, float]:
    """Entropies of the first-pixel and second-pixel marginals of a pair histogram."""
    return _entropy_of_counts(hist.counts.sum(axis=1)), _entropy_of_counts(hist.counts.sum(axis=0))
