import dataclasses
import json
import os

import numpy as np
import pytest

from attnforecast.errors import FormatError, MissingStream, ValidationError
from attnforecast.recording import (
    AnnotationTrack, EventKind, FrameStream, GazeStream, ImuStream, PhoneEvent, Segment,
    SegmentKind, SegmentSchedule, load_recording, save_recording,
)
from attnforecast.synth import SynthConfig, generate

from conftest import D, E, interval, make_recording


def _files(d):
    return {f: (d / f).read_bytes() for f in sorted(os.listdir(d))}


def test_round_trip_equal(short_recording, tmp_path):
    m = save_recording(short_recording, tmp_path / "a")
    back = load_recording(m)
    assert back == short_recording
    # and a second save of the reloaded copy is byte-identical
    save_recording(back, tmp_path / "b")
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_all_streams_listed(short_recording, tmp_path):
    m = save_recording(short_recording, tmp_path)
    manifest = json.loads(m.read_text())
    assert set(manifest["streams"]) == {"gaze", "head_imu", "phone_imu", "phone_events",
                                        "frames", "maps", "annotations", "segments"}
    for fname in manifest["streams"].values():
        for line in (tmp_path / fname).read_text().splitlines()[:3]:
            json.loads(line)


def test_empty_optional_streams_omitted(tmp_path):
    rec = make_recording([(0, 5, D), (5, 8, E)])
    m = save_recording(rec, tmp_path)
    manifest = json.loads(m.read_text())
    assert set(manifest["streams"]) == {"annotations", "segments"}
    assert load_recording(m) == rec


def test_ten_minutes_under_50mb(tmp_path):
    rec = generate(SynthConfig(n_participants=1, session_length=600.0, seed=5))[0]
    save_recording(rec, tmp_path)
    total = sum(p.stat().st_size for p in tmp_path.iterdir())
    assert total < 50e6


def test_out_of_order_gaze_on_disk_names_timestamp(short_recording, tmp_path):
    m = save_recording(short_recording, tmp_path)
    lines = (tmp_path / "gaze.jsonl").read_text().splitlines()
    rows = [json.loads(x) for x in lines]
    rows[10]["t"] = 123.456  # far later than its neighbours
    (tmp_path / "gaze.jsonl").write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    with pytest.raises(ValidationError) as exc:
        load_recording(m)
    # the first sample breaking monotonicity is the one after the bad one
    assert exc.value.t == pytest.approx(rows[11]["t"])
    assert str(rows[11]["t"]) in str(exc.value)


def test_missing_stream_file(short_recording, tmp_path):
    m = save_recording(short_recording, tmp_path)
    (tmp_path / "head_imu.jsonl").unlink()
    with pytest.raises(MissingStream):
        load_recording(m)


def test_missing_required_stream(tmp_path):
    rec = make_recording([(0, 5, D)])
    m = save_recording(rec, tmp_path)
    doc = json.loads(m.read_text())
    del doc["streams"]["segments"]
    m.write_text(json.dumps(doc))
    with pytest.raises(MissingStream):
        load_recording(m)


@pytest.mark.parametrize("bad", ["{not json", "[1, 2]", '{"x": 1}'])
def test_malformed_record(short_recording, tmp_path, bad):
    m = save_recording(short_recording, tmp_path)
    with open(tmp_path / "phone_events.jsonl", "a") as fh:
        fh.write(bad + "\n")
    with pytest.raises(FormatError):
        load_recording(m)


def test_clock_offset_applied(tmp_path):
    rec = make_recording([(0, 5, D), (5, 8, E)])
    m = save_recording(rec, tmp_path)
    doc = json.loads(m.read_text())
    doc["clock_offsets"] = {"annotations": 2.0}
    m.write_text(json.dumps(doc))
    back = load_recording(m)
    assert [iv.start for iv in back.annotations] == [2.0, 7.0]


# -- mutation: each invariant violated once must be rejected ---------------------------

def _mut_gaze_order(r):
    t = r.gaze.t.copy()
    t[5] = t[4]
    return dataclasses.replace(r, gaze=dataclasses.replace(r.gaze, t=t))


def _mut_gaze_invalid_xy(r):
    g = r.gaze
    i = int(np.flatnonzero(~g.valid)[0])
    x = g.x.copy()
    x[i] = 1.0
    return dataclasses.replace(r, gaze=dataclasses.replace(g, x=x))


def _mut_gaze_valid_nan(r):
    g = r.gaze
    i = int(np.flatnonzero(g.valid)[0])
    y = g.y.copy()
    y[i] = np.nan
    return dataclasses.replace(r, gaze=dataclasses.replace(g, y=y))


def _mut_imu_order(r):
    t = r.head_imu.t.copy()
    t[3], t[4] = t[4], t[3]
    return dataclasses.replace(r, head_imu=dataclasses.replace(r.head_imu, t=t))


def _mut_imu_nonfinite(r):
    a = r.phone_imu.accel.copy()
    a[7, 1] = np.inf
    return dataclasses.replace(r, phone_imu=dataclasses.replace(r.phone_imu, accel=a))


def _mut_phone_orientation_missing(r):
    return dataclasses.replace(r, phone_imu=dataclasses.replace(r.phone_imu, orientation=None))


def _mut_head_orientation_present(r):
    h = r.head_imu
    return dataclasses.replace(r, head_imu=dataclasses.replace(h, orientation=np.zeros((len(h), 3))))


def _events(r, extra):
    ev = sorted(list(r.phone_events) + extra, key=lambda e: e.t)
    return dataclasses.replace(r, phone_events=tuple(ev))


def _mut_events_decreasing(r):
    ev = list(r.phone_events)
    ev[2], ev[3] = ev[3], ev[2]
    if ev[2].t == ev[3].t:
        ev[3] = ev[3]._replace(t=ev[3].t - 1.0)
    return dataclasses.replace(r, phone_events=tuple(ev))


def _mut_screen_twice(r):
    ons = [e for e in r.phone_events if e.kind == EventKind.SCREEN_ON]
    return _events(r, [PhoneEvent(ons[0].t + 0.0005, EventKind.SCREEN_ON)])


def _mut_app_unbalanced(r):
    return _events(r, [PhoneEvent(1.0, EventKind.APP_STOP, "maps")])


def _mut_app_unknown(r):
    return _events(r, [PhoneEvent(1.0, EventKind.APP_START, "nope"),
                       PhoneEvent(2.0, EventKind.APP_STOP, "nope")])


def _frames(r, **kw):
    return dataclasses.replace(r, frames=dataclasses.replace(r.frames, **kw))


def _mut_pixels(r):
    p = r.frames.class_pixel_counts.copy()
    p[4, 0] = r.constants.frame_pixel_total + 1
    return _frames(r, class_pixel_counts=p)


def _mut_face_negative(r):
    f = r.frames.face_count.copy()
    f[9] = -1
    return _frames(r, face_count=f)


def _mut_onehot(r):
    s = r.frames.scene_class.copy()
    s[2, :] = 0
    return _frames(r, scene_class=s)


def _mut_stats_order(r):
    s = r.frames.saliency.copy()
    s[3, 1] = s[3, 2] + 0.1  # min > max
    return _frames(r, saliency=s)


def _mut_std_negative(r):
    s = r.frames.depth.copy()
    s[3, 3] = -0.5
    return _frames(r, depth=s)


def _mut_map_ref(r):
    m = r.frames.depth_map.copy()
    m[0] = r.frames.maps.shape[0]
    return _frames(r, depth_map=m)


def _mut_interval_empty(r):
    ivs = list(r.annotations)
    ivs[1] = ivs[1]._replace(end=ivs[1].start)
    return dataclasses.replace(r, annotations=AnnotationTrack(tuple(ivs)))


def _mut_interval_overlap(r):
    ivs = list(r.annotations)
    ivs[2] = ivs[2]._replace(start=ivs[1].start + 0.01 * (ivs[1].end - ivs[1].start))
    return dataclasses.replace(r, annotations=AnnotationTrack(tuple(ivs)))


def _mut_interval_same_labels(r):
    ivs = list(r.annotations)
    ivs[1] = ivs[1]._replace(attention=ivs[0].attention)
    return dataclasses.replace(r, annotations=AnnotationTrack(tuple(ivs)))


def _mut_segment_kinds(r):
    segs = list(r.segments)
    segs[1] = segs[1]._replace(kind=segs[0].kind)
    return dataclasses.replace(r, segments=SegmentSchedule(tuple(segs)))


def _mut_segment_overlap(r):
    segs = list(r.segments)
    segs[1] = segs[1]._replace(start=segs[0].end - 1.0)
    return dataclasses.replace(r, segments=SegmentSchedule(tuple(segs)))


def _mut_stream_outside(r):
    h = r.head_imu
    return dataclasses.replace(r, head_imu=dataclasses.replace(h, t=h.t + 1e6))


MUTATIONS = [
    _mut_gaze_order, _mut_gaze_invalid_xy, _mut_gaze_valid_nan, _mut_imu_order, _mut_imu_nonfinite,
    _mut_phone_orientation_missing, _mut_head_orientation_present, _mut_events_decreasing,
    _mut_screen_twice, _mut_app_unbalanced, _mut_app_unknown, _mut_pixels, _mut_face_negative,
    _mut_onehot, _mut_stats_order, _mut_std_negative, _mut_map_ref, _mut_interval_empty,
    _mut_interval_overlap, _mut_interval_same_labels, _mut_segment_kinds, _mut_segment_overlap,
    _mut_stream_outside,
]


def test_generated_recording_is_valid(short_recording):
    short_recording.validate()


@pytest.mark.parametrize("mutate", MUTATIONS, ids=lambda f: f.__name__[5:])
def test_validation_rejects_mutation(short_recording, mutate):
    bad = mutate(short_recording)
    with pytest.raises(ValidationError):
        bad.validate()


def test_same_attention_allowed_when_context_differs():
    a = interval(0, 5, D)
    b = interval(5, 9, D, loco=a.locomotion.__class__("walk"))
    make_recording([a, b]).validate()


def test_validation_error_carries_first_timestamp():
    rec = make_recording([(0, 5, D), (5, 8, E)],
                         gaze=GazeStream(np.array([0.0, 0.1, 0.1, 0.05]), np.zeros(4), np.zeros(4),
                                         np.ones(4, dtype=bool)))
    with pytest.raises(ValidationError) as exc:
        rec.validate()
    assert exc.value.t == pytest.approx(0.1)


def test_empty_streams_valid():
    rec = make_recording([(0, 1, D)], head_imu=ImuStream.empty(), frames=FrameStream.empty())
    rec.validate()
    assert rec.time_range() == (0.0, 1.0)


def test_segment_schedule_iterable():
    s = SegmentSchedule((Segment(0.0, 1.0, SegmentKind.WORKING, 0),))
    assert len(s) == 1 and s[0].kind == SegmentKind.WORKING
