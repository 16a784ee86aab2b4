import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiocam.nn import LayerSpec, NetworkSpec, SplitMix64, builtin_spec, init_weights
from semiocam.palettes import GRAY, PLASMA, get_palette
from semiocam.profiler import (
    CSV_HEADER,
    EntropyProfile,
    ProfileRow,
    dataset_profile,
    layer_profile,
    profile_json,
    read_profile_csv,
    render_heatmap,
    superization_events,
    write_profile_csv,
)
from semiocam.tensor_io import Dataset, read_ppm


@pytest.fixture(scope="module")
def vgg():
    spec = builtin_spec("vgg_small")
    return spec, init_weights(spec, SplitMix64(8))


@pytest.fixture(scope="module")
def images():
    rng = np.random.default_rng(12)
    return Dataset(rng.random((4, 3, 32, 32)).astype(np.float32), np.array([0, 6, 6, 0]))


def _toy_three_layer():
    spec = NetworkSpec((1, 6, 6), [
        LayerSpec("conv", "conv1", in_channels=1, out_channels=2, kernel=3, padding=1),
        LayerSpec("relu", "relu1"),
        LayerSpec("maxpool", "pool1"),
        LayerSpec("flatten", "flat"),
        LayerSpec("linear", "fc", in_features=18, out_features=2)], 2)
    return spec


def test_layer_profile_structure_and_determinism(vgg, images):
    spec, w = vgg
    a = layer_profile(spec, w, images.images[0], 0)
    assert [e.layer for e in a] == ["conv1", "relu1", "conv2", "relu2", "maxpool1", "conv3", "relu3",
                                    "conv4", "relu4", "maxpool2"]
    assert a == layer_profile(spec, w, images.images[0], 0)
    toy = _toy_three_layer()
    out = layer_profile(toy, init_weights(toy, SplitMix64(0)), np.ones((1, 6, 6), np.float32), 1)
    assert [e.layer for e in out] == ["conv1", "relu1", "pool1"]


def test_constant_raw_map_gives_zero_entropy():
    spec = _toy_three_layer()
    w = init_weights(spec, SplitMix64(1))
    w["conv1.weight"][:] = 0
    w["conv1.bias"][:] = [0.5, 0.25]
    x = np.random.default_rng(0).random((1, 6, 6)).astype(np.float32)
    for e in layer_profile(spec, w, x, 0, sde=True):
        assert (e.h0, e.ame, e.sde) == (0, 0, 0)


def test_dataset_profile_aggregation(vgg, images):
    spec, w = vgg
    single = dataset_profile(spec, w, images.subset([1]), "label")
    per = layer_profile(spec, w, images.images[1], 6)
    assert [(r.layer, r.h0, r.ame) for r in single.rows] == [(e.layer, e.h0, e.ame) for e in per]
    dup = dataset_profile(spec, w, images.subset([1, 1, 1]), "label")
    assert [r.ame for r in dup.rows] == pytest.approx([r.ame for r in single.rows], abs=1e-15)
    assert {r.images for r in dup.rows} == {3}
    two = dataset_profile(spec, w, images.subset([0, 1]), "label")
    p0 = layer_profile(spec, w, images.images[0], 0)
    for row, e0, e1 in zip(two.rows, p0, per):
        assert row.h0 == (e0.h0 + e1.h0) / 2
        assert row.ame == (e0.ame + e1.ame) / 2
    assert two.fingerprint == spec.fingerprint()
    with pytest.raises(ValueError):
        dataset_profile(spec, w, images.subset([]))


def test_dataset_profile_order_and_threads(vgg, images):
    spec, w = vgg
    base = dataset_profile(spec, w, images, "auto")
    rev = dataset_profile(spec, w, images.subset([3, 2, 1, 0]), "auto")
    threaded = dataset_profile(spec, w, images, "auto", threads=3)
    assert write_profile_csv(threaded) == write_profile_csv(base)
    for a, b in zip(base.rows, rev.rows):
        assert a.ame == pytest.approx(b.ame, abs=1e-9)
        assert a.h0 == pytest.approx(b.h0, abs=1e-9)
    # only spatial layers, in network order
    assert [r.index for r in base.rows] == sorted(r.index for r in base.rows)
    assert "flatten" not in base.layers and "fc1" not in base.layers
    fixed = dataset_profile(spec, w, images, 3)
    assert fixed.class_policy == "3"


def test_sde_rows_on_small_maps():
    spec = _toy_three_layer()
    w = init_weights(spec, SplitMix64(4))
    rng = np.random.default_rng(9)
    data = Dataset(rng.random((5, 1, 6, 6)).astype(np.float32), np.array([0, 1, 1, 0, 1]))
    a = dataset_profile(spec, w, data, "label", sde=True)
    b = dataset_profile(spec, w, data.subset([4, 3, 2, 1, 0]), "label", sde=True, threads=2)
    for ra, rb in zip(a.rows, b.rows):
        assert ra.sde == pytest.approx(rb.sde, abs=1e-9)


def _profile(values):
    return EntropyProfile([ProfileRow(f"l{i}", i, 1.0, v, None, 5) for i, v in enumerate(values)])


def test_superization_events_drop_and_rise():
    events = superization_events(EntropyProfile([
        ProfileRow("relu2", 5, 0, 0.5231, None, 1),
        ProfileRow("maxpool2", 6, 0, 0.4147, None, 1),
        ProfileRow("conv3", 7, 0, 0.4423, None, 1)]))
    assert [(e.layer, e.kind) for e in events] == [("maxpool2", "drop"), ("conv3", "rise")]
    assert events[0].delta_ame == pytest.approx(-0.1084, abs=1e-12)
    assert events[1].delta_ame == pytest.approx(0.0276, abs=1e-12)
    assert {e.kind for e in superization_events(_profile([0.3] * 4))} == {"flat"}
    assert superization_events(_profile([0.5, 0.504]))[0].kind == "flat"
    with pytest.raises(ValueError):
        superization_events(_profile([0.5]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=12))
def test_event_deltas_telescope(values):
    events = superization_events(_profile(values))
    assert len(events) == len(values) - 1
    assert math.fsum(e.delta_ame for e in events) == pytest.approx(values[-1] - values[0], abs=1e-12)


def test_profile_csv():
    prof = EntropyProfile([ProfileRow("maxpool1", 4, 2.5, 0.25, None, 3),
                           ProfileRow("conv1", 0, 5.123456789, 0.6543219, 0.98765432, 3)])
    text = write_profile_csv(prof).decode()
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[1] == "conv1,0,5.123457,0.654322,0.987654,3"
    assert lines[2] == "maxpool1,4,2.500000,0.250000,,3"
    back = read_profile_csv(text.encode())
    assert back.layers == ["conv1", "maxpool1"]
    assert back.rows[0].ame == pytest.approx(0.6543219, abs=1e-6)
    assert back.rows[1].sde is None
    assert len(write_profile_csv(_profile([0.2])).decode().splitlines()) == 2
    again = EntropyProfile.from_dict(__import__("json").loads(profile_json(prof)))
    assert again == prof


def test_render_heatmap():
    g = np.array([[0, 255], [128, 7]], dtype=np.uint8)
    img = read_ppm(render_heatmap(g, PLASMA))
    assert img[0, 0].tolist() == list(PLASMA[0]) and img[0, 1].tolist() == list(PLASMA[255])
    big = read_ppm(render_heatmap(g, PLASMA, 2))
    assert big.shape == (4, 4, 3)
    np.testing.assert_array_equal(big[2:4, 0:2], np.broadcast_to(PLASMA[128], (2, 2, 3)))
    gray = read_ppm(render_heatmap(g, GRAY))
    for ch in range(3):
        np.testing.assert_array_equal(gray[..., ch], g)
    assert render_heatmap(g, PLASMA, 3) == render_heatmap(g, PLASMA, 3)
    with pytest.raises(ValueError):
        render_heatmap(g, PLASMA, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.integers(1, 4))
def test_heatmap_size(h, w, scale):
    img = read_ppm(render_heatmap(np.zeros((h, w), np.uint8), PLASMA, scale))
    assert img.shape == (scale * h, scale * w, 3)


def test_palettes():
    assert PLASMA.shape == (256, 3) and PLASMA.dtype == np.uint8
    assert PLASMA[0].tolist() == [13, 8, 135] and PLASMA[255].tolist() == [240, 249, 33]
    np.testing.assert_array_equal(GRAY[:, 0], np.arange(256))
    assert get_palette("gray") is GRAY
    with pytest.raises(ValueError):
        get_palette("viridis")


def test_profile_and_prune_figures(tmp_path):
    from semiocam.plotting import plot_profile
    out = tmp_path / "profile.png"
    plot_profile(_profile([0.6, 0.59, 0.4, 0.45]), out)
    data = out.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n" and len(data) > 1000
