import numpy as np
import pytest

from attnforecast.recording import (
    AnnotationInterval, AnnotationTrack, Attention, Environment, FrameStream, GazeStream,
    ImuStream, Locomotion, Recording, Segment, SegmentKind, SegmentSchedule,
)
from attnforecast.synth import SynthConfig, generate

D, E = Attention.DEVICE, Attention.ENVIRONMENT


def interval(start, end, att, env=Environment.OFFICE, indoor=True, loco=Locomotion.SIT):
    return AnnotationInterval(float(start), float(end), att, env, indoor, loco)


def make_recording(intervals, segments=None, pid="P01", **streams) -> Recording:
    """Recording from (start, end, attention) triples; one working segment by default."""
    ivs = tuple(interval(*iv) if len(iv) == 3 else iv for iv in intervals)
    if segments is None:
        segments = [(ivs[0].start, ivs[-1].end, SegmentKind.WORKING, 0)]
    segs = tuple(Segment(float(a), float(b), k, i) for a, b, k, i in segments)
    return Recording(participant_id=pid, annotations=AnnotationTrack(ivs),
                     segments=SegmentSchedule(segs), **streams)


def constant_imu(t0, t1, rate, accel, gyro, orientation=None) -> ImuStream:
    t = np.round(np.arange(t0, t1, 1.0 / rate), 6)
    n = t.shape[0]
    o = None if orientation is None else np.tile(orientation, (n, 1)).astype(float)
    return ImuStream(t, np.tile(accel, (n, 1)).astype(float), np.tile(gyro, (n, 1)).astype(float), o)


def gaze_stream(t, x, y, valid=None) -> GazeStream:
    t = np.asarray(t, dtype=float)
    valid = np.ones(t.shape[0], dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    x = np.where(valid, np.asarray(x, dtype=float), np.nan)
    y = np.where(valid, np.asarray(y, dtype=float), np.nan)
    return GazeStream(t, x, y, valid)


@pytest.fixture(scope="session")
def small_corpus():
    cfg = SynthConfig(n_participants=3, session_length=900.0, cue_probability=0.9, seed=11, n_blocks=3)
    return generate(cfg)


@pytest.fixture(scope="session")
def one_recording(small_corpus):
    return small_corpus[0]


__all__ = ["D", "E", "interval", "make_recording", "constant_imu", "gaze_stream", "FrameStream"]


@pytest.fixture(scope="session")
def short_recording():
    cfg = SynthConfig(n_participants=1, session_length=180.0, cue_probability=1.0, seed=4, n_blocks=1)
    return generate(cfg)[0]


# -- acceptance reporting: one PASS/FAIL line per criterion in the terminal summary ---------

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
