import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attnforecast import _accel
from attnforecast.errors import MissingData, WindowOutOfRange
from attnforecast.features import (
    FeatureExtractor, FeatureGroup, aggregate_binary, aggregate_numeric, extract, feature_names,
)
from attnforecast.recording import (
    Constants, EventKind, FrameStream, PhoneEvent, load_recording, save_recording,
)

from conftest import D, E, constant_imu, gaze_stream, make_recording
from oracles import lstsq_slope, pop_std


def test_numeric_constant():
    out = aggregate_numeric([(0.1 * i, 1.0) for i in range(10)], (0.0, 1.0))
    assert out == {"mean": 1.0, "min": 1.0, "max": 1.0, "std": 0.0, "slope": 0.0}


def test_numeric_hand_example():
    out = aggregate_numeric([(0, 0), (0.5, 1), (1, 2)], (0, 1.001))
    assert out["mean"] == pytest.approx(1.0, abs=1e-12)
    assert (out["min"], out["max"]) == (0.0, 2.0)
    assert out["std"] == pytest.approx(math.sqrt(2 / 3), abs=1e-12)
    assert out["slope"] == pytest.approx(2.0, abs=1e-12)


def test_numeric_half_open_window():
    out = aggregate_numeric([(0, 0), (0.5, 1), (1, 2)], (0, 1.0))
    assert out["max"] == 1.0  # t = 1.0 excluded


def test_numeric_empty_window():
    with pytest.raises(MissingData):
        aggregate_numeric([(5.0, 1.0)], (0.0, 1.0))


def test_binary_examples():
    assert aggregate_binary([(0, 0), (0.5, 0), (1, 0)], (0, 1.5)) == {"mean": 0.0, "slope": 0.0}
    assert aggregate_binary([(0, 1), (0.5, 1), (1, 1)], (0, 1.5)) == {"mean": 1.0, "slope": 0.0}
    out = aggregate_binary([(0, 0), (0.5, 1), (1.0, 1)], (0, 1.5))
    assert out["mean"] == pytest.approx(2 / 3, abs=1e-12)
    assert out["slope"] == pytest.approx(1.0, abs=1e-12)


def test_binary_empty_window():
    with pytest.raises(MissingData):
        aggregate_binary([], (0.0, 1.0))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 99), st.floats(-1e3, 1e3, allow_nan=False)),
                min_size=1, max_size=40, unique_by=lambda p: p[0]))
def test_numeric_matches_reference(pairs):
    series = [(k / 100.0, v) for k, v in pairs]
    out = aggregate_numeric(series, (0.0, 1.0))
    ts = [p[0] for p in series]
    vs = [p[1] for p in series]
    assert out["min"] <= out["mean"] <= out["max"]
    assert out["min"] == min(vs) and out["max"] == max(vs)
    scale = max(1.0, max(abs(v) for v in vs))
    assert out["mean"] == pytest.approx(sum(vs) / len(vs), abs=1e-9 * scale)
    assert out["std"] == pytest.approx(pop_std(vs), abs=1e-7 * scale)
    assert out["slope"] == pytest.approx(lstsq_slope(ts, vs), abs=1e-6 * scale)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=30))
def test_binary_mean_in_unit_interval(bits):
    out = aggregate_binary([(i / 30, b) for i, b in enumerate(bits)], (0.0, 1.0))
    assert 0.0 <= out["mean"] <= 1.0


# -- full extraction ----------------------------------------------------------------------------

def _constant_frames(t0, t1, rate=24.0, consts=Constants()):
    t = np.round(np.arange(t0, t1, 1 / rate), 6)
    n = t.shape[0]
    C, S = len(consts.classes), len(consts.scenes)
    presence = np.zeros((n, C), dtype=bool)
    presence[:, 3] = True
    pixels = np.zeros((n, C), dtype=np.int64)
    pixels[:, 3] = 1000
    inst = presence.astype(np.int64) * 2
    scene = np.zeros((n, S), dtype=np.int64)
    scene[:, 1] = 1
    stats = np.tile([0.4, 0.1, 0.9, 0.2, 3.0], (n, 1))
    depth = np.tile([5.0, 1.0, 9.0, 2.0, 4.0], (n, 1))
    refs = np.zeros(n, dtype=np.int64)
    maps = np.stack([np.full((32, 32), 0.25), np.full((32, 32), 0.75), np.full((32, 32), 6.0)])
    return FrameStream(t, np.full(n, 2, dtype=np.int64), presence, pixels, inst, scene,
                       stats, stats.copy(), depth, refs, refs + 1, refs + 2, maps)


@pytest.fixture(scope="module")
def constant_rec():
    t = np.arange(0, 10, 1 / 30)
    return make_recording(
        [(0, 10, D)],
        gaze=gaze_stream(t, np.full_like(t, 3.0), np.full_like(t, 4.0)),
        head_imu=constant_imu(0, 10, 100, [0, 0, 9.81], [0.1, 0.2, 0.3]),
        phone_imu=constant_imu(0, 10, 100, [1, 2, 2], [0, 0, 0], orientation=[10, 20, 30]),
        frames=_constant_frames(0, 10),
    ).validate()


def test_constant_streams(constant_rec):
    fv = extract(constant_rec, (4.0, 5.0), FeatureGroup.PROPOSED_PLUS_GAZE).as_dict()
    assert fv["ego.face_count.mean"] == 2.0
    assert fv["ego.presence.cat.mean"] == 1.0 or fv[f"ego.presence.{Constants().classes[3]}.mean"] == 1.0
    assert fv[f"ego.pixels.{Constants().classes[3]}.mean"] == 1000.0
    assert fv[f"ego.scene.{Constants().scenes[1]}.mean"] == 1.0
    assert fv["ego.saliency.entropy.mean"] == 3.0
    assert fv["ego.depth.mean.mean"] == 5.0
    assert fv["ego.head_imu.accel.z.mean"] == 9.81
    assert fv["ego.head_imu.gyro.norm.mean"] == pytest.approx(math.sqrt(0.14))
    assert fv["phone.imu.accel.norm.mean"] == 3.0
    assert fv["phone.imu.orientation.y.mean"] == 20.0
    assert fv["gaze.fixation.x.mean"] == 3.0 and fv["gaze.fixation.norm.mean"] == 5.0
    assert fv["gaze.at.saliency.mean"] == 0.25
    assert fv["gaze.at.objectness.mean"] == 0.75
    assert fv["gaze.at.depth.mean"] == 6.0
    assert fv["gaze.at.norm.mean"] == pytest.approx(math.sqrt(0.25 ** 2 + 0.75 ** 2 + 36))
    for name, v in fv.items():
        if name.endswith(".std") or name.endswith(".slope"):
            assert v == 0.0, name
        if name.endswith(".present") and not name.startswith("phone.events"):
            assert v == 1.0, name


def test_no_phone_events(constant_rec):
    fv = extract(constant_rec, (4.0, 5.0), FeatureGroup.PHONE).as_dict()
    assert fv["phone.events.present"] == 0.0
    for name, v in fv.items():
        if name.startswith(("phone.touch", "phone.screen", "phone.app")):
            assert v == 0.0, name


def test_missing_substreams_flagged():
    rec = make_recording([(0, 10, D)])
    fv = extract(rec, (2.0, 3.0), FeatureGroup.PROPOSED_PLUS_GAZE).as_dict()
    for flag in ("ego.frames.present", "ego.head_imu.present", "phone.imu.present",
                 "phone.events.present", "gaze.fixations.present", "gaze.at.present"):
        assert fv[flag] == 0.0
    assert all(v == 0.0 for v in fv.values())


def test_event_binarization():
    events = (PhoneEvent(0.50, EventKind.TOUCH), PhoneEvent(1.20, EventKind.SCREEN_ON),
              PhoneEvent(1.50, EventKind.SCREEN_OFF))
    rec = make_recording([(0, 3, D)], phone_events=events)
    fv = extract(rec, (0.0, 1.0), FeatureGroup.PHONE).as_dict()
    assert fv["phone.touch.mean"] == pytest.approx(1 / 30)  # one of thirty ticks
    assert fv["phone.events.present"] == 1.0
    # before the first screen event the state is the opposite of it (off)
    assert fv["phone.screen.mean"] == 0.0
    fv = extract(rec, (1.0, 2.0), FeatureGroup.PHONE).as_dict()
    assert fv["phone.screen.mean"] == pytest.approx(9 / 30)  # ticks 1.2333 .. 1.4667
    assert fv["phone.touch.mean"] == 0.0


def test_screen_off_first_means_on_before():
    rec = make_recording([(0, 3, D)], phone_events=(PhoneEvent(2.0, EventKind.SCREEN_OFF),))
    fv = extract(rec, (0.0, 1.0), FeatureGroup.PHONE).as_dict()
    assert fv["phone.screen.mean"] == 1.0


def test_group_composition(one_recording):
    fx = FeatureExtractor(one_recording)
    t = [100.0, 200.5]
    ego = fx.matrix(t, 1.0, FeatureGroup.EGOCENTRIC)
    phone = fx.matrix(t, 1.0, FeatureGroup.PHONE)
    prop = fx.matrix(t, 1.0, FeatureGroup.PROPOSED)
    full = fx.matrix(t, 1.0, FeatureGroup.PROPOSED_PLUS_GAZE)
    assert fx.names(FeatureGroup.PROPOSED) == fx.names(FeatureGroup.EGOCENTRIC) + fx.names(FeatureGroup.PHONE)
    assert np.array_equal(prop, np.concatenate([ego, phone], axis=1))
    assert np.array_equal(full[:, :prop.shape[1]], prop)
    names = fx.names(FeatureGroup.PROPOSED_PLUS_GAZE)
    assert len(set(names)) == len(names)
    assert names == feature_names(one_recording.constants, FeatureGroup.PROPOSED_PLUS_GAZE)


def test_deterministic_and_finite(one_recording):
    a = extract(one_recording, (50.0, 51.0), FeatureGroup.PROPOSED_PLUS_GAZE)
    b = extract(one_recording, (50.0, 51.0), FeatureGroup.PROPOSED_PLUS_GAZE)
    assert a == b
    M = FeatureExtractor(one_recording).matrix(np.arange(2.0, 800.0, 7.5), 1.0)
    assert np.all(np.isfinite(M))


def test_min_mean_max_order(one_recording):
    fx = FeatureExtractor(one_recording)
    names = fx.names(FeatureGroup.PROPOSED_PLUS_GAZE)
    M = fx.matrix(np.arange(2.0, 800.0, 3.5), 1.0)
    idx = {n: i for i, n in enumerate(names)}
    for n in names:
        if n.endswith(".mean") and n[:-5] + ".min" in idx:
            lo, mid, hi = M[:, idx[n[:-5] + ".min"]], M[:, idx[n]], M[:, idx[n[:-5] + ".max"]]
            assert np.all(lo <= mid) and np.all(mid <= hi), n
        if n.endswith(".mean") and n[:-5] + ".min" not in idx:
            assert np.all((M[:, idx[n]] >= 0) & (M[:, idx[n]] <= 1)), n


def test_batched_equals_single(one_recording):
    fx = FeatureExtractor(one_recording)
    M = fx.matrix([30.0, 31.5], 1.0)
    single = extract(one_recording, (29.0, 30.0), FeatureGroup.PROPOSED_PLUS_GAZE).values
    assert np.array_equal(M[0], single)


def test_window_out_of_range(one_recording):
    lo, hi = one_recording.time_range()
    with pytest.raises(WindowOutOfRange):
        extract(one_recording, (hi - 0.5, hi + 0.5), FeatureGroup.PHONE)
    with pytest.raises(WindowOutOfRange):
        extract(one_recording, (lo - 1.0, lo), FeatureGroup.PHONE)


@pytest.mark.parametrize("delta", [0.25, 1000.0, -0.5])
def test_time_shift_invariance(short_recording, tmp_path, delta):
    m = save_recording(short_recording, tmp_path)
    doc = json.loads(m.read_text())
    doc["clock_offsets"] = {k: delta for k in doc["streams"]}
    m.write_text(json.dumps(doc))
    shifted = load_recording(m)
    ends = np.arange(3.0, 170.0, 4.0)
    a = FeatureExtractor(short_recording).matrix(ends, 1.0)
    b = FeatureExtractor(shifted).matrix(ends + delta, 1.0)
    assert np.allclose(a, b, rtol=1e-7, atol=1e-7)


def test_feature_group_parse():
    assert FeatureGroup.parse("Proposed+Gaze") is FeatureGroup.PROPOSED_PLUS_GAZE
    assert FeatureGroup.parse("proposed_gaze") is FeatureGroup.PROPOSED_PLUS_GAZE
    assert FeatureGroup.parse("phone") is FeatureGroup.PHONE


@pytest.mark.skipif(_accel.numba_kernels is None, reason="numba disabled")
def test_window_stats_backends_agree():
    rng = np.random.default_rng(4)
    t = np.sort(rng.uniform(0, 60, 3000))
    vals = rng.normal(size=(3000, 4)) * 50 + 10
    t0 = np.arange(0.0, 59.0, 0.5)
    lo = np.searchsorted(t, t0).astype(np.int64)
    hi = np.searchsorted(t, t0 + rng.choice([0.0, 0.01, 1.0, 5.0], size=t0.shape[0])).astype(np.int64)
    a = _accel.numpy_kernels.window_stats(t, vals, lo, hi, t0)
    b = _accel.numba_kernels.window_stats(t, vals, lo, hi, t0)
    assert np.array_equal(a[..., 1:3], b[..., 1:3])  # min/max exact
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)  # sums differ only in order
