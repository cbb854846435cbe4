"""Session data model, validation and JSON-lines storage.

A recording directory holds ``manifest.json`` plus one ``.jsonl`` file per
populated stream. Streams are held in memory as column arrays; the
per-sample record types (``GazeSample`` etc.) are used at the edges, for
construction and iteration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import FormatError, MissingStream, ValidationError

FORMAT_VERSION = "attnforecast-recording/1"

VOC_CLASSES = (
    "aeroplane", "bicycle", "bird", "boat", "bottle", "bus", "car", "cat",
    "chair", "cow", "diningtable", "dog", "horse", "motorbike", "person",
    "pottedplant", "sheep", "sofa", "train", "tvmonitor",
)
DEFAULT_APPS = (
    "browser", "camera", "email", "facebook", "game", "maps", "music", "whatsapp",
)
MAP_STATS = ("mean", "min", "max", "std", "entropy")
STREAMS = ("gaze", "head_imu", "phone_imu", "phone_events", "frames", "maps",
           "annotations", "segments")
REQUIRED_STREAMS = ("annotations", "segments")


class Attention(str, Enum):
    DEVICE = "device"
    ENVIRONMENT = "environment"


class Environment(str, Enum):
    CAFE = "cafe"
    CORRIDOR = "corridor"
    LIBRARY = "library"
    CANTEEN = "canteen"
    OFFICE = "office"
    STREET = "street"


class Locomotion(str, Enum):
    SIT = "sit"
    STAND = "stand"
    WALK = "walk"


class SegmentKind(str, Enum):
    WORKING = "working"
    WAITING = "waiting"


class EventKind(str, Enum):
    TOUCH = "touch"
    SCREEN_ON = "screen_on"
    SCREEN_OFF = "screen_off"
    APP_START = "app_start"
    APP_STOP = "app_stop"


@dataclass(frozen=True)
class Constants:
    frame_pixel_total: int = 640 * 480
    classes: tuple[str, ...] = VOC_CLASSES
    scenes: tuple[str, ...] = tuple(e.value for e in Environment)
    apps: tuple[str, ...] = DEFAULT_APPS
    fov_deg: float = 175.0
    map_grid: int = 32

    def to_json(self) -> dict:
        return {
            "frame_pixel_total": self.frame_pixel_total,
            "classes": list(self.classes),
            "scenes": list(self.scenes),
            "apps": list(self.apps),
            "fov_deg": self.fov_deg,
            "map_grid": self.map_grid,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Constants":
        base = cls()
        return cls(
            frame_pixel_total=int(d.get("frame_pixel_total", base.frame_pixel_total)),
            classes=tuple(d.get("classes", base.classes)),
            scenes=tuple(d.get("scenes", base.scenes)),
            apps=tuple(d.get("apps", base.apps)),
            fov_deg=float(d.get("fov_deg", base.fov_deg)),
            map_grid=int(d.get("map_grid", base.map_grid)),
        )


# -- per-sample records -------------------------------------------------------

class GazeSample(NamedTuple):
    t: float
    x: float
    y: float
    valid: bool


class ImuSample(NamedTuple):
    t: float
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float]
    orientation: tuple[float, float, float] | None = None


class PhoneEvent(NamedTuple):
    t: float
    kind: EventKind
    app_id: str | None = None


class MapStats(NamedTuple):
    mean: float
    min: float
    max: float
    std: float
    entropy: float


@dataclass(frozen=True, eq=False)
class FrameFeatures:
    t: float
    face_count: int
    class_presence: np.ndarray
    class_pixel_counts: np.ndarray
    class_instance_counts: np.ndarray
    scene_class: np.ndarray
    saliency: MapStats
    objectness: MapStats
    depth: MapStats
    saliency_map: np.ndarray | None = None
    objectness_map: np.ndarray | None = None
    depth_map: np.ndarray | None = None


# -- column streams -----------------------------------------------------------

def _same(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and np.array_equal(a, b, equal_nan=a.dtype.kind == "f")


class _Columns:
    """Equality over all array fields, NaN-aware."""

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return all(_same(getattr(self, f.name), getattr(other, f.name)) for f in fields(self))

    def __len__(self) -> int:
        return int(self.t.shape[0])


@dataclass(frozen=True, eq=False)
class GazeStream(_Columns):
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    valid: np.ndarray

    @classmethod
    def empty(cls) -> "GazeStream":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0, dtype=bool))

    @classmethod
    def from_samples(cls, samples: Iterable[GazeSample]) -> "GazeStream":
        rows = list(samples)
        if not rows:
            return cls.empty()
        t, x, y, v = zip(*rows)
        valid = np.array(v, dtype=bool)
        x = np.where(valid, np.array(x, dtype=float), np.nan)
        y = np.where(valid, np.array(y, dtype=float), np.nan)
        return cls(np.array(t, dtype=float), x, y, valid)

    def samples(self) -> Iterator[GazeSample]:
        for i in range(len(self)):
            yield GazeSample(float(self.t[i]), float(self.x[i]), float(self.y[i]), bool(self.valid[i]))


@dataclass(frozen=True, eq=False)
class ImuStream(_Columns):
    t: np.ndarray
    accel: np.ndarray
    gyro: np.ndarray
    orientation: np.ndarray | None = None

    @classmethod
    def empty(cls, with_orientation: bool = False) -> "ImuStream":
        o = np.zeros((0, 3)) if with_orientation else None
        return cls(np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3)), o)

    @classmethod
    def from_samples(cls, samples: Iterable[ImuSample], with_orientation: bool = False) -> "ImuStream":
        rows = list(samples)
        if not rows:
            return cls.empty(with_orientation)
        t = np.array([r.t for r in rows], dtype=float)
        accel = np.array([r.accel for r in rows], dtype=float).reshape(-1, 3)
        gyro = np.array([r.gyro for r in rows], dtype=float).reshape(-1, 3)
        orientation = None
        if with_orientation:
            orientation = np.array([r.orientation for r in rows], dtype=float).reshape(-1, 3)
        return cls(t, accel, gyro, orientation)

    def samples(self) -> Iterator[ImuSample]:
        for i in range(len(self)):
            o = None if self.orientation is None else tuple(map(float, self.orientation[i]))
            yield ImuSample(float(self.t[i]), tuple(map(float, self.accel[i])),
                            tuple(map(float, self.gyro[i])), o)


@dataclass(frozen=True, eq=False)
class FrameStream(_Columns):
    """Per-frame scene descriptors; map refs index ``maps`` (-1 = none)."""

    t: np.ndarray
    face_count: np.ndarray
    class_presence: np.ndarray
    class_pixel_counts: np.ndarray
    class_instance_counts: np.ndarray
    scene_class: np.ndarray
    saliency: np.ndarray
    objectness: np.ndarray
    depth: np.ndarray
    saliency_map: np.ndarray
    objectness_map: np.ndarray
    depth_map: np.ndarray
    maps: np.ndarray

    @classmethod
    def empty(cls, n_classes: int = len(VOC_CLASSES), n_scenes: int = 6, grid: int = 32) -> "FrameStream":
        z = np.zeros(0)
        zi = np.zeros(0, dtype=np.int64)
        zc = np.zeros((0, n_classes), dtype=np.int64)
        return cls(z, zi, zc.astype(bool), zc, zc.copy(), np.zeros((0, n_scenes), dtype=np.int64),
                   np.zeros((0, 5)), np.zeros((0, 5)), np.zeros((0, 5)),
                   zi, zi.copy(), zi.copy(), np.zeros((0, grid, grid)))

    @classmethod
    def from_frames(cls, frames: Iterable[FrameFeatures], n_classes: int = len(VOC_CLASSES),
                    n_scenes: int = 6, grid: int = 32) -> "FrameStream":
        rows = list(frames)
        if not rows:
            return cls.empty(n_classes, n_scenes, grid)
        maps: list[np.ndarray] = []
        ids: dict[int, int] = {}

        def ref(g):
            if g is None:
                return -1
            key = id(g)
            if key not in ids:
                ids[key] = len(maps)
                maps.append(np.asarray(g, dtype=float))
            return ids[key]

        sal, obj, dep = [], [], []
        for f in rows:
            sal.append(ref(f.saliency_map))
            obj.append(ref(f.objectness_map))
            dep.append(ref(f.depth_map))
        map_arr = np.array(maps, dtype=float) if maps else np.zeros((0, grid, grid))
        return cls(
            np.array([f.t for f in rows], dtype=float),
            np.array([f.face_count for f in rows], dtype=np.int64),
            np.array([f.class_presence for f in rows], dtype=bool),
            np.array([f.class_pixel_counts for f in rows], dtype=np.int64),
            np.array([f.class_instance_counts for f in rows], dtype=np.int64),
            np.array([f.scene_class for f in rows], dtype=np.int64),
            np.array([tuple(f.saliency) for f in rows], dtype=float),
            np.array([tuple(f.objectness) for f in rows], dtype=float),
            np.array([tuple(f.depth) for f in rows], dtype=float),
            np.array(sal, dtype=np.int64), np.array(obj, dtype=np.int64),
            np.array(dep, dtype=np.int64), map_arr,
        )

    def _grid(self, ref: int):
        return None if ref < 0 else self.maps[ref]

    def frame(self, i: int) -> FrameFeatures:
        return FrameFeatures(
            t=float(self.t[i]),
            face_count=int(self.face_count[i]),
            class_presence=self.class_presence[i],
            class_pixel_counts=self.class_pixel_counts[i],
            class_instance_counts=self.class_instance_counts[i],
            scene_class=self.scene_class[i],
            saliency=MapStats(*map(float, self.saliency[i])),
            objectness=MapStats(*map(float, self.objectness[i])),
            depth=MapStats(*map(float, self.depth[i])),
            saliency_map=self._grid(int(self.saliency_map[i])),
            objectness_map=self._grid(int(self.objectness_map[i])),
            depth_map=self._grid(int(self.depth_map[i])),
        )


class AnnotationInterval(NamedTuple):
    start: float
    end: float
    attention: Attention
    environment: Environment
    indoor: bool
    locomotion: Locomotion


class Segment(NamedTuple):
    start: float
    end: float
    kind: SegmentKind
    block_index: int


@dataclass(frozen=True)
class AnnotationTrack:
    intervals: tuple[AnnotationInterval, ...] = ()

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __getitem__(self, i):
        return self.intervals[i]

    @property
    def time_range(self) -> tuple[float, float] | None:
        if not self.intervals:
            return None
        return self.intervals[0].start, self.intervals[-1].end


@dataclass(frozen=True)
class SegmentSchedule:
    segments: tuple[Segment, ...] = ()

    def __iter__(self):
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def __getitem__(self, i):
        return self.segments[i]


@dataclass(frozen=True)
class Recording:
    participant_id: str
    gaze: GazeStream = field(default_factory=GazeStream.empty)
    head_imu: ImuStream = field(default_factory=ImuStream.empty)
    phone_imu: ImuStream = field(default_factory=lambda: ImuStream.empty(True))
    phone_events: tuple[PhoneEvent, ...] = ()
    frames: FrameStream = field(default_factory=FrameStream.empty)
    annotations: AnnotationTrack = field(default_factory=AnnotationTrack)
    segments: SegmentSchedule = field(default_factory=SegmentSchedule)
    constants: Constants = field(default_factory=Constants)

    def time_range(self) -> tuple[float, float]:
        """Earliest and latest timestamp across all streams and annotations."""
        lo, hi = math.inf, -math.inf
        for s in (self.gaze, self.head_imu, self.phone_imu, self.frames):
            if len(s):
                lo = min(lo, float(s.t[0]))
                hi = max(hi, float(s.t[-1]))
        if self.phone_events:
            lo = min(lo, self.phone_events[0].t)
            hi = max(hi, self.phone_events[-1].t)
        for iv in (*self.annotations, *self.segments):
            lo = min(lo, iv.start)
            hi = max(hi, iv.end)
        return lo, hi

    def validate(self) -> "Recording":
        validate(self)
        return self


# -- validation ---------------------------------------------------------------

def _check_increasing(name: str, t: np.ndarray, strict: bool = True) -> None:
    if t.shape[0] == 0:
        return
    if not np.all(np.isfinite(t)):
        bad = int(np.flatnonzero(~np.isfinite(t))[0])
        raise ValidationError(f"{name}: non-finite timestamp at index {bad}", float(t[bad]))
    d = np.diff(t)
    bad = np.flatnonzero(d <= 0 if strict else d < 0)
    if bad.size:
        i = int(bad[0]) + 1
        raise ValidationError(f"{name}: timestamps not {'strictly ' if strict else ''}increasing", float(t[i]))


def _first_bad_row(name: str, t: np.ndarray, bad_rows: np.ndarray, what: str) -> None:
    rows = np.flatnonzero(bad_rows)
    if rows.size:
        raise ValidationError(f"{name}: {what}", float(t[int(rows[0])]))


def _validate_imu(name: str, s: ImuStream, need_orientation: bool) -> None:
    n = len(s)
    _check_increasing(name, s.t)
    if s.accel.shape != (n, 3) or s.gyro.shape != (n, 3):
        raise ValidationError(f"{name}: accel/gyro must be n x 3")
    vecs = [s.accel, s.gyro]
    if need_orientation:
        if s.orientation is None or s.orientation.shape != (n, 3):
            raise ValidationError(f"{name}: orientation required")
        vecs.append(s.orientation)
    elif s.orientation is not None:
        raise ValidationError(f"{name}: orientation not expected")
    for v in vecs:
        _first_bad_row(name, s.t, ~np.all(np.isfinite(v), axis=1), "non-finite vector")


def _validate_gaze(g: GazeStream) -> None:
    _check_increasing("gaze", g.t)
    ok = np.isfinite(g.x) & np.isfinite(g.y)
    _first_bad_row("gaze", g.t, g.valid & ~ok, "valid sample without finite x/y")
    _first_bad_row("gaze", g.t, ~g.valid & ~(np.isnan(g.x) & np.isnan(g.y)),
                   "invalid sample carries x/y")


def _validate_events(events: tuple[PhoneEvent, ...], apps: tuple[str, ...]) -> None:
    prev_t = -math.inf
    screen = None
    running: dict[str, bool] = {}
    for ev in events:
        if not math.isfinite(ev.t) or ev.t < prev_t:
            raise ValidationError("phone_events: timestamps decreasing", ev.t)
        prev_t = ev.t
        kind = EventKind(ev.kind)
        if kind in (EventKind.SCREEN_ON, EventKind.SCREEN_OFF):
            if screen is not None and screen == kind:
                raise ValidationError("phone_events: screen on/off must alternate", ev.t)
            screen = kind
        elif kind in (EventKind.APP_START, EventKind.APP_STOP):
            if ev.app_id not in apps:
                raise ValidationError(f"phone_events: unknown app {ev.app_id!r}", ev.t)
            is_start = kind == EventKind.APP_START
            if running.get(ev.app_id, False) == is_start:
                raise ValidationError(f"phone_events: unbalanced start/stop for {ev.app_id!r}", ev.t)
            running[ev.app_id] = is_start
    for app, on in sorted(running.items()):
        if on:
            raise ValidationError(f"phone_events: app {app!r} started but never stopped", prev_t)


def _validate_frames(fr: FrameStream, c: Constants) -> None:
    n = len(fr)
    _check_increasing("frames", fr.t)
    C, S, G = len(c.classes), len(c.scenes), c.map_grid
    shapes = {
        "face_count": (n,), "class_presence": (n, C), "class_pixel_counts": (n, C),
        "class_instance_counts": (n, C), "scene_class": (n, S), "saliency": (n, 5),
        "objectness": (n, 5), "depth": (n, 5), "saliency_map": (n,),
        "objectness_map": (n,), "depth_map": (n,),
    }
    for name, shape in shapes.items():
        if getattr(fr, name).shape != shape:
            raise ValidationError(f"frames: {name} has shape {getattr(fr, name).shape}, expected {shape}")
    if fr.maps.ndim != 3 or fr.maps.shape[1:] != (G, G):
        raise ValidationError(f"frames: maps must be m x {G} x {G}")
    if n == 0:
        return
    t = fr.t
    _first_bad_row("frames", t, fr.face_count < 0, "negative face count")
    for name in ("class_pixel_counts", "class_instance_counts"):
        _first_bad_row("frames", t, np.any(getattr(fr, name) < 0, axis=1), f"negative {name}")
    _first_bad_row("frames", t, np.any(fr.class_pixel_counts > c.frame_pixel_total, axis=1),
                   "pixel count exceeds frame pixel total")
    onehot = fr.scene_class
    _first_bad_row("frames", t, ~(np.all((onehot == 0) | (onehot == 1), axis=1) & (onehot.sum(axis=1) == 1)),
                   "scene class is not one-hot")
    for name in ("saliency", "objectness", "depth"):
        st = getattr(fr, name)
        mean, lo, hi, std, ent = st.T
        bad = ~np.all(np.isfinite(st), axis=1) | (lo > mean) | (mean > hi) | (std < 0) | (ent < 0)
        if name != "depth":
            bad |= (lo < 0) | (hi > 1)
        _first_bad_row("frames", t, bad, f"{name} statistics inconsistent")
    m = fr.maps.shape[0]
    for name in ("saliency_map", "objectness_map", "depth_map"):
        r = getattr(fr, name)
        _first_bad_row("frames", t, (r < -1) | (r >= m), f"{name} reference out of range")
    if m and not np.all(np.isfinite(fr.maps)):
        raise ValidationError("frames: non-finite map value")


def _validate_annotations(track: AnnotationTrack) -> None:
    prev = None
    for iv in track:
        if not (math.isfinite(iv.start) and math.isfinite(iv.end)) or iv.end <= iv.start:
            raise ValidationError("annotations: interval end must exceed start", iv.start)
        Attention(iv.attention)
        Environment(iv.environment)
        Locomotion(iv.locomotion)
        if not isinstance(iv.indoor, (bool, np.bool_)):
            raise ValidationError("annotations: indoor must be boolean", iv.start)
        if prev is not None:
            if iv.start < prev.end:
                raise ValidationError("annotations: intervals overlap or are unordered", iv.start)
            if iv.start == prev.end and iv[2:] == prev[2:]:
                raise ValidationError("annotations: adjacent intervals carry identical labels", iv.start)
        prev = iv


def _validate_segments(sched: SegmentSchedule) -> None:
    prev = None
    for seg in sched:
        if not (math.isfinite(seg.start) and math.isfinite(seg.end)) or seg.end <= seg.start:
            raise ValidationError("segments: end must exceed start", seg.start)
        SegmentKind(seg.kind)
        if prev is not None:
            if seg.start < prev.end:
                raise ValidationError("segments: overlap or unordered", seg.start)
            if seg.block_index == prev.block_index and seg.kind == prev.kind:
                raise ValidationError("segments: kinds must alternate within a block", seg.start)
        prev = seg


def validate(rec: Recording) -> None:
    """Raise ValidationError on the first violated invariant."""
    if not rec.participant_id:
        raise ValidationError("participant_id must be non-empty")
    c = rec.constants
    _validate_gaze(rec.gaze)
    _validate_imu("head_imu", rec.head_imu, need_orientation=False)
    _validate_imu("phone_imu", rec.phone_imu, need_orientation=True)
    _validate_events(rec.phone_events, c.apps)
    _validate_frames(rec.frames, c)
    _validate_annotations(rec.annotations)
    _validate_segments(rec.segments)
    span = rec.annotations.time_range
    if span is None:
        return
    a0, a1 = span
    for name in ("gaze", "head_imu", "phone_imu", "frames"):
        s = getattr(rec, name)
        if len(s) and (s.t[-1] < a0 or s.t[0] > a1):
            raise ValidationError(f"{name}: time range does not overlap annotations", float(s.t[0]))


# -- serialization ------------------------------------------------------------

def _num(v):
    """JSON-ready scalar; NaN becomes null."""
    v = float(v)
    return None if math.isnan(v) else v


def _dump_lines(path: Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, separators=(",", ":")))
            fh.write("\n")


def _gaze_records(g: GazeStream):
    for i in range(len(g)):
        yield {"t": float(g.t[i]), "x": _num(g.x[i]), "y": _num(g.y[i]), "valid": bool(g.valid[i])}


def _imu_records(s: ImuStream):
    acc = s.accel.tolist()
    gyr = s.gyro.tolist()
    ori = None if s.orientation is None else s.orientation.tolist()
    for i, t in enumerate(s.t.tolist()):
        r = {"t": t, "accel": acc[i], "gyro": gyr[i]}
        if ori is not None:
            r["orientation"] = ori[i]
        yield r


def _event_records(events):
    for ev in events:
        r = {"t": float(ev.t), "kind": EventKind(ev.kind).value}
        if ev.app_id is not None:
            r["app_id"] = ev.app_id
        yield r


def _frame_records(fr: FrameStream):
    cols = {
        "face_count": fr.face_count.tolist(),
        "class_presence": fr.class_presence.astype(int).tolist(),
        "class_pixel_counts": fr.class_pixel_counts.tolist(),
        "class_instance_counts": fr.class_instance_counts.tolist(),
        "scene_class": fr.scene_class.tolist(),
    }
    stats = {k: getattr(fr, k).tolist() for k in ("saliency", "objectness", "depth")}
    refs = {k: getattr(fr, k).tolist() for k in ("saliency_map", "objectness_map", "depth_map")}
    for i, t in enumerate(fr.t.tolist()):
        r = {"t": t}
        for k, v in cols.items():
            r[k] = v[i]
        for k, v in stats.items():
            r[k] = dict(zip(MAP_STATS, v[i]))
        for k, v in refs.items():
            r[k] = None if v[i] < 0 else v[i]
        yield r


def _map_records(maps: np.ndarray):
    for i, g in enumerate(maps.tolist()):
        yield {"id": i, "grid": g}


def _annotation_records(track: AnnotationTrack):
    for iv in track:
        yield {"t": iv.start, "end": iv.end, "attention": Attention(iv.attention).value,
               "environment": Environment(iv.environment).value, "indoor": bool(iv.indoor),
               "locomotion": Locomotion(iv.locomotion).value}


def _segment_records(sched: SegmentSchedule):
    for s in sched:
        yield {"t": s.start, "end": s.end, "kind": SegmentKind(s.kind).value, "block": int(s.block_index)}


def save_recording(rec: Recording, directory: str | Path) -> Path:
    """Write ``rec`` under ``directory``; returns the manifest path.

    Streams with no records are left out of the manifest. Output is
    byte-stable for a given recording.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    writers = {
        "gaze": (len(rec.gaze), lambda: _gaze_records(rec.gaze)),
        "head_imu": (len(rec.head_imu), lambda: _imu_records(rec.head_imu)),
        "phone_imu": (len(rec.phone_imu), lambda: _imu_records(rec.phone_imu)),
        "phone_events": (len(rec.phone_events), lambda: _event_records(rec.phone_events)),
        "frames": (len(rec.frames), lambda: _frame_records(rec.frames)),
        "maps": (rec.frames.maps.shape[0], lambda: _map_records(rec.frames.maps)),
        "annotations": (-1, lambda: _annotation_records(rec.annotations)),
        "segments": (-1, lambda: _segment_records(rec.segments)),
    }
    streams = {}
    for name in STREAMS:
        n, gen = writers[name]
        if n == 0:
            continue
        fname = f"{name}.jsonl"
        _dump_lines(d / fname, gen())
        streams[name] = fname
    manifest = {
        "format": FORMAT_VERSION,
        "participant_id": rec.participant_id,
        "streams": streams,
        "clock_offsets": {},
        "constants": rec.constants.to_json(),
    }
    path = d / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _read_lines(path: Path, stream: str) -> list[dict]:
    if not path.is_file():
        raise MissingStream(f"{stream}: file not found: {path}")
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path.name}:{lineno}: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise FormatError(f"{path.name}:{lineno}: record is not an object")
            if stream != "maps" and "t" not in rec:
                raise FormatError(f"{path.name}:{lineno}: missing 't'")
            out.append(rec)
    return out


def _field(rec: dict, key: str, where: str):
    try:
        return rec[key]
    except KeyError:
        raise FormatError(f"{where}: missing field {key!r}") from None


def _floats(values, where: str, shape=None) -> np.ndarray:
    try:
        arr = np.array([np.nan if v is None else v for v in values], dtype=float)
    except (TypeError, ValueError):
        raise FormatError(f"{where}: expected numbers") from None
    if shape is not None:
        if arr.size == 0:
            return arr.reshape((0,) + shape)
        if arr.shape[1:] != shape:
            raise FormatError(f"{where}: expected records of shape {shape}")
    return arr


def _parse_gaze(rows, off) -> GazeStream:
    if not rows:
        return GazeStream.empty()
    t = _floats([_field(r, "t", "gaze") for r in rows], "gaze.t") + off
    x = _floats([r.get("x") for r in rows], "gaze.x")
    y = _floats([r.get("y") for r in rows], "gaze.y")
    valid = np.array([bool(_field(r, "valid", "gaze")) for r in rows], dtype=bool)
    return GazeStream(t, x, y, valid)


def _parse_imu(rows, off, name, with_orientation) -> ImuStream:
    if not rows:
        return ImuStream.empty(with_orientation)
    t = _floats([_field(r, "t", name) for r in rows], f"{name}.t") + off
    acc = _floats([_field(r, "accel", name) for r in rows], f"{name}.accel", (3,))
    gyr = _floats([_field(r, "gyro", name) for r in rows], f"{name}.gyro", (3,))
    ori = None
    if with_orientation:
        ori = _floats([_field(r, "orientation", name) for r in rows], f"{name}.orientation", (3,))
    return ImuStream(t, acc, gyr, ori)


def _parse_events(rows, off) -> tuple[PhoneEvent, ...]:
    out = []
    for r in rows:
        try:
            kind = EventKind(_field(r, "kind", "phone_events"))
        except ValueError:
            raise FormatError(f"phone_events: unknown kind {r.get('kind')!r}") from None
        app = r.get("app_id")
        if kind in (EventKind.APP_START, EventKind.APP_STOP) and not isinstance(app, str):
            raise FormatError("phone_events: app event without app_id")
        out.append(PhoneEvent(float(r["t"]) + off, kind, app))
    return tuple(out)


def _parse_frames(rows, map_rows, off, c: Constants) -> FrameStream:
    G = c.map_grid
    if map_rows:
        ids = [_field(r, "id", "maps") for r in map_rows]
        if ids != list(range(len(ids))):
            raise FormatError("maps: ids must be 0..m-1 in order")
        maps = _floats([_field(r, "grid", "maps") for r in map_rows], "maps.grid", (G, G))
    else:
        maps = np.zeros((0, G, G))
    if not rows:
        fr = FrameStream.empty(len(c.classes), len(c.scenes), G)
        return FrameStream(**{**{f.name: getattr(fr, f.name) for f in fields(fr)}, "maps": maps})
    C, S = len(c.classes), len(c.scenes)

    def ints(key, shape=None):
        vals = [_field(r, key, "frames") for r in rows]
        try:
            arr = np.array(vals, dtype=np.int64)
        except (TypeError, ValueError):
            raise FormatError(f"frames.{key}: expected integers") from None
        if shape is not None and arr.shape[1:] != shape:
            raise FormatError(f"frames.{key}: expected length {shape[0]}")
        return arr

    def stats(key):
        vals = []
        for r in rows:
            d = _field(r, key, "frames")
            try:
                vals.append([d[s] for s in MAP_STATS])
            except (KeyError, TypeError):
                raise FormatError(f"frames.{key}: expected {list(MAP_STATS)}") from None
        return _floats(vals, f"frames.{key}", (5,))

    def refs(key):
        return np.array([-1 if r.get(key) is None else int(r[key]) for r in rows], dtype=np.int64)

    return FrameStream(
        t=_floats([r["t"] for r in rows], "frames.t") + off,
        face_count=ints("face_count"),
        class_presence=ints("class_presence", (C,)).astype(bool),
        class_pixel_counts=ints("class_pixel_counts", (C,)),
        class_instance_counts=ints("class_instance_counts", (C,)),
        scene_class=ints("scene_class", (S,)),
        saliency=stats("saliency"),
        objectness=stats("objectness"),
        depth=stats("depth"),
        saliency_map=refs("saliency_map"),
        objectness_map=refs("objectness_map"),
        depth_map=refs("depth_map"),
        maps=maps,
    )


def _parse_annotations(rows, off) -> AnnotationTrack:
    out = []
    for r in rows:
        try:
            out.append(AnnotationInterval(
                float(r["t"]) + off, float(_field(r, "end", "annotations")) + off,
                Attention(_field(r, "attention", "annotations")),
                Environment(_field(r, "environment", "annotations")),
                _field(r, "indoor", "annotations"),
                Locomotion(_field(r, "locomotion", "annotations")),
            ))
        except ValueError as exc:
            raise FormatError(f"annotations: {exc}") from None
    return AnnotationTrack(tuple(out))


def _parse_segments(rows, off) -> SegmentSchedule:
    out = []
    for r in rows:
        try:
            out.append(Segment(float(r["t"]) + off, float(_field(r, "end", "segments")) + off,
                               SegmentKind(_field(r, "kind", "segments")),
                               int(_field(r, "block", "segments"))))
        except ValueError as exc:
            raise FormatError(f"segments: {exc}") from None
    return SegmentSchedule(tuple(out))


def load_recording(manifest_path: str | Path) -> Recording:
    """Read and validate the recording described by ``manifest_path``."""
    mpath = Path(manifest_path)
    if not mpath.is_file():
        raise MissingStream(f"manifest not found: {mpath}")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{mpath.name}: {exc.msg}") from None
    if not isinstance(manifest, dict) or "participant_id" not in manifest:
        raise FormatError(f"{mpath.name}: missing participant_id")
    streams = manifest.get("streams", {})
    unknown = set(streams) - set(STREAMS)
    if unknown:
        raise FormatError(f"{mpath.name}: unknown streams {sorted(unknown)}")
    for name in REQUIRED_STREAMS:
        if name not in streams:
            raise MissingStream(f"{mpath.name}: required stream {name!r} not listed")
    consts = Constants.from_json(manifest.get("constants", {}))
    offsets = manifest.get("clock_offsets", {}) or {}
    base = mpath.parent

    def rows(name):
        if name not in streams:
            return []
        return _read_lines(base / streams[name], name)

    def off(name):
        return float(offsets.get(name, 0.0))

    rec = Recording(
        participant_id=str(manifest["participant_id"]),
        gaze=_parse_gaze(rows("gaze"), off("gaze")),
        head_imu=_parse_imu(rows("head_imu"), off("head_imu"), "head_imu", False),
        phone_imu=_parse_imu(rows("phone_imu"), off("phone_imu"), "phone_imu", True),
        phone_events=_parse_events(rows("phone_events"), off("phone_events")),
        frames=_parse_frames(rows("frames"), rows("maps"), off("frames"), consts),
        annotations=_parse_annotations(rows("annotations"), off("annotations")),
        segments=_parse_segments(rows("segments"), off("segments")),
        constants=consts,
    )
    validate(rec)
    return rec


def load_corpus(directory: str | Path) -> list[Recording]:
    """Load every ``*/manifest.json`` under ``directory``, ordered by participant id."""
    d = Path(directory)
    paths = sorted(d.glob("*/manifest.json"))
    if (d / "manifest.json").is_file():
        paths.insert(0, d / "manifest.json")
    if not paths:
        raise MissingStream(f"no recordings found under {d}")
    recs = [load_recording(p) for p in paths]
    return sorted(recs, key=lambda r: r.participant_id)
