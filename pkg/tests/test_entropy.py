import itertools
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from semiocam.entropy import (
    aura_matrix_entropy,
    bivariate_entropy,
    entropy,
    joint_histogram,
    marginal_entropies,
    merge_outcomes,
    relative_entropy,
    spatial_disorder_entropy,
    univariate_entropy,
)

ALPHABET = np.array([0, 85, 170, 255], dtype=np.uint8)


def checkerboard(n=8):
    return (np.indices((n, n)).sum(axis=0) % 2 * 255).astype(np.uint8)


def iid_levels(shape, seed):
    return ALPHABET[np.random.default_rng(seed).integers(0, 4, shape)]


def _hist_equals_oracle(m, k, l):
    hist = joint_histogram(m, (k, l))
    ref = oracles.pair_counts(m.tolist(), k, l)
    nz = np.argwhere(hist.counts)
    got = {(int(g), int(h)): int(hist.counts[g, h]) for g, h in nz}
    return got == dict(ref) and hist.total == (m.shape[0] - abs(k)) * (m.shape[1] - abs(l))


# -- distributions ------------------------------------------------------------------

def test_entropy_examples():
    assert entropy([0, 1, 0]) == 0
    assert entropy([0.25] * 4) == 2.0
    assert entropy([0.5, 0.25, 0.25]) == 1.5
    with pytest.raises(ValueError):
        entropy([0.5, 0.6])


def test_merge_examples():
    assert merge_outcomes([0.5, 0.5], 0, 1).tolist() == [1.0]
    p = [0.5, 0.25, 0.25]
    q = merge_outcomes(p, 1, 2)
    assert q.tolist() == [0.5, 0.5]
    assert (entropy(p), entropy(q)) == (1.5, 1.0)
    z = [0.3, 0.0, 0.7]
    assert entropy(merge_outcomes(z, 0, 1)) == pytest.approx(entropy(z), abs=1e-15)
    assert merge_outcomes([0.1, 0.2, 0.3, 0.4], 3, 1).tolist() == pytest.approx([0.1, 0.6, 0.3])
    with pytest.raises(IndexError):
        merge_outcomes(p, 0, 3)
    with pytest.raises(ValueError):
        merge_outcomes(p, 1, 1)


# -- univariate and joint -------------------------------------------------------------

def test_univariate_examples():
    assert univariate_entropy(np.full((5, 3), 9, np.uint8)) == 0
    assert univariate_entropy(np.array([[0, 255], [255, 0]], np.uint8)) == 1.0
    assert univariate_entropy(np.arange(16, dtype=np.uint8).reshape(4, 4)) == 4.0


def test_joint_histogram_examples():
    hist = joint_histogram(np.array([[0, 255], [0, 255]], np.uint8), (0, 1))
    assert hist.counts[0, 255] == 2 and hist.total == 2
    m = iid_levels((5, 6), 0)
    diag = joint_histogram(m, (0, 0)).counts
    assert np.count_nonzero(diag - np.diag(np.diag(diag))) == 0
    assert np.diag(diag).tolist() == np.bincount(m.ravel(), minlength=256).tolist()
    a, b = joint_histogram(m, (2, -1)), joint_histogram(m, (-2, 1))
    np.testing.assert_array_equal(b.counts, a.counts.T)
    np.testing.assert_array_equal(a.transpose().counts, b.counts)
    with pytest.raises(ValueError):
        joint_histogram(m, (5, 0))


def test_bivariate_examples():
    hist = joint_histogram(checkerboard(), (0, 1))
    assert bivariate_entropy(hist) == 1.0
    assert bivariate_entropy(joint_histogram(np.full((4, 4), 3, np.uint8), (1, 1))) == 0
    h = joint_histogram(iid_levels((9, 9), 3), (1, 2))
    assert bivariate_entropy(h) == bivariate_entropy(h.transpose())


def test_relative_entropy_examples():
    assert relative_entropy(np.full((4, 4), 7, np.uint8), (0, 1)) == 0
    assert relative_entropy(checkerboard(), (0, 1)) == 0.0
    assert 0.93 <= relative_entropy(iid_levels((128, 128), 1), (0, 1)) <= 1.02


def test_ame_and_sde_examples():
    const = np.full((6, 6), 200, np.uint8)
    assert aura_matrix_entropy(const) == 0 and spatial_disorder_entropy(const) == 0
    assert aura_matrix_entropy(checkerboard()) == 0
    m = iid_levels((128, 128), 2)
    assert 0.93 <= aura_matrix_entropy(m) <= 1.02
    assert spatial_disorder_entropy(iid_levels((32, 32), 3)) >= 0.85
    m = iid_levels((7, 5), 4)
    assert aura_matrix_entropy(m) == aura_matrix_entropy(m.T)
    with pytest.raises(ValueError, match="2x2"):
        aura_matrix_entropy(np.zeros((1, 5), np.uint8))
    with pytest.raises(ValueError, match="aura_matrix_entropy"):
        spatial_disorder_entropy(np.zeros((65, 10), np.uint8))


def test_ame_and_sde_match_plain_python():
    for seed in range(20):
        m = iid_levels((2 + seed % 4, 2 + seed % 3), seed)
        assert aura_matrix_entropy(m) == pytest.approx(oracles.ame(m.tolist()), abs=1e-12)
        assert spatial_disorder_entropy(m) == pytest.approx(oracles.sde(m.tolist()), abs=1e-12)


def test_sde_of_every_2x2_map():
    for values in itertools.product(range(4), repeat=4):
        m = ALPHABET[np.array(values)].reshape(2, 2)
        rows = m.tolist()
        # nine offsets, (0,0) contributing weight 4 with H_R = 0
        num = sum((2 - abs(a)) * (2 - abs(b)) * oracles.h_rel(rows, a, b)
                  for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0))
        assert spatial_disorder_entropy(m) == pytest.approx(num / 16, abs=1e-12)


# -- brute-force pair enumeration --------------------------------------------------------

def test_joint_histogram_exhaustive_small_maps():
    for h, w in ((1, 2), (2, 1), (1, 3), (3, 1), (2, 2), (1, 4), (4, 1)):
        for values in itertools.product(range(4), repeat=h * w):
            m = ALPHABET[np.array(values)].reshape(h, w)
            for k in range(-(h - 1), h):
                for l in range(-(w - 1), w):
                    assert _hist_equals_oracle(m, k, l), (m.tolist(), k, l)


def test_joint_histogram_random_maps():
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        h, w = rng.integers(1, 5, 2)
        m = ALPHABET[rng.integers(0, 4, (h, w))]
        k, l = int(rng.integers(-(h - 1), h)), int(rng.integers(-(w - 1), w))
        assert _hist_equals_oracle(m, k, l), (m.tolist(), k, l)


# -- properties --------------------------------------------------------------------------

def _random_distribution(rng):
    p = rng.random(int(rng.integers(2, 12)))
    p[rng.random(p.size) < 0.2] = 0
    if p.sum() == 0:
        p[0] = 1
    return p / p.sum()


def test_merge_lemma_and_subadditivity_seeded():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    for _ in range(1000):
        p = _random_distribution(rng)
        i, j = rng.choice(p.size, 2, replace=False)
        assert entropy(merge_outcomes(p, int(i), int(j))) <= entropy(p) + 1e-12
    for _ in range(1000):
        m = rng.integers(0, 256, tuple(rng.integers(2, 10, 2))).astype(np.uint8)
        m = np.minimum(m, int(rng.integers(1, 256)))
        k, l = int(rng.integers(-(m.shape[0] - 1), m.shape[0])), int(rng.integers(-(m.shape[1] - 1), m.shape[1]))
        hist = joint_histogram(m, (k, l))
        hr, hc = marginal_entropies(hist)
        hxy = bivariate_entropy(hist)
        assert hxy <= hr + hc + 1e-12
        assert hxy >= max(hr, hc) - 1e-12
    assert time.perf_counter() - start < 5


graymaps = arrays(np.uint8, st.tuples(st.integers(2, 9), st.integers(2, 9)),
                  elements=st.sampled_from([0, 3, 77, 128, 255]))


@settings(max_examples=60, deadline=None)
@given(graymaps, st.data())
def test_relative_entropy_reversal_symmetry(m, data):
    k = data.draw(st.integers(-(m.shape[0] - 1), m.shape[0] - 1))
    l = data.draw(st.integers(-(m.shape[1] - 1), m.shape[1] - 1))
    assert relative_entropy(m, (k, l)) == relative_entropy(m, (-k, -l))


@settings(max_examples=40, deadline=None)
@given(graymaps, st.permutations(list(range(256))))
def test_relabel_invariance(m, perm):
    lut = np.array(perm, dtype=np.uint8)
    r = lut[m]
    assert univariate_entropy(r) == univariate_entropy(m)
    assert bivariate_entropy(joint_histogram(r, (1, 0))) == bivariate_entropy(joint_histogram(m, (1, 0)))
    assert aura_matrix_entropy(r) == aura_matrix_entropy(m)
    assert spatial_disorder_entropy(r) == spatial_disorder_entropy(m)


@settings(max_examples=40, deadline=None)
@given(graymaps)
def test_transpose_symmetry(m):
    assert aura_matrix_entropy(m.T) == aura_matrix_entropy(m)
    assert spatial_disorder_entropy(m.T) == spatial_disorder_entropy(m)


def test_boundary_slack_on_larger_maps():
    rng = np.random.default_rng(11)
    for _ in range(30):
        size = tuple(rng.integers(32, 49, 2))
        levels = int(rng.integers(2, 9))
        m = (rng.integers(0, levels, size) * (255 // levels)).astype(np.uint8)
        if rng.random() < 0.5:  # add spatial structure
            m = np.sort(m, axis=1)
        k, l = int(rng.integers(-3, 4)), int(rng.integers(-3, 4))
        assert -0.05 <= relative_entropy(m, (k, l)) <= 1.05
