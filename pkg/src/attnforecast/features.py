"""Window aggregation and the four feature groups.

Numeric channels are summarised by mean/min/max/std/slope over samples with
``t0 <= t < t1``; binary channels by mean and slope. Event streams (touch,
screen, app activity) are first sampled on a 30 Hz grid anchored at the
window start. A substream with no samples in the window contributes zeros
plus a ``present`` flag of 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from ._accel import kernels
from .errors import MissingData, OutOfField, WindowOutOfRange
from .gaze import FixationParams, fixation_arrays, grid_cell
from .recording import Constants, EventKind, MAP_STATS, Recording

NUMERIC_AGGS = ("mean", "min", "max", "std", "slope")
BINARY_AGGS = ("mean", "slope")
EVENT_GRID_HZ = 30.0
DEFAULT_FEATURE_WINDOW = 1.0
_AXES = ("x", "y", "z", "norm")


class FeatureGroup(str, Enum):
    EGOCENTRIC = "egocentric"
    PHONE = "phone"
    PROPOSED = "proposed"
    PROPOSED_PLUS_GAZE = "proposed+gaze"

    @classmethod
    def parse(cls, s: str) -> "FeatureGroup":
        key = s.strip().lower().replace("_", "+").replace(" ", "")
        aliases = {"proposed+gaze": cls.PROPOSED_PLUS_GAZE, "proposedplusgaze": cls.PROPOSED_PLUS_GAZE,
                   "gaze": cls.PROPOSED_PLUS_GAZE}
        if key in aliases:
            return aliases[key]
        return cls(key)

    @property
    def blocks(self) -> tuple[str, ...]:
        return {
            FeatureGroup.EGOCENTRIC: ("ego",),
            FeatureGroup.PHONE: ("phone",),
            FeatureGroup.PROPOSED: ("ego", "phone"),
            FeatureGroup.PROPOSED_PLUS_GAZE: ("ego", "phone", "gaze"),
        }[self]


@dataclass(frozen=True, eq=False)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.names) != self.values.shape[0]:
            raise ValueError("names and values differ in length")

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.values, other.values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


# -- single-series aggregation --------------------------------------------------

def _series_arrays(series) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(series, tuple) and len(series) == 2 and isinstance(series[0], np.ndarray):
        t, v = series
    else:
        pairs = list(series)
        if not pairs:
            return np.zeros(0), np.zeros(0)
        t, v = zip(*pairs)
    return np.asarray(t, dtype=float), np.asarray(v, dtype=float)


def _stats_in_window(series, window) -> np.ndarray:
    t0, t1 = window
    if not t1 > t0:
        raise ValueError("window length must be positive")
    t, v = _series_arrays(series)
    order = np.argsort(t, kind="stable")
    t, v = t[order], v[order]
    lo = np.searchsorted(t, t0, "left")
    hi = np.searchsorted(t, t1, "left")
    if hi <= lo:
        raise MissingData(f"no samples in [{t0}, {t1})")
    return kernels.window_stats(t, v.reshape(-1, 1), np.array([lo], dtype=np.int64),
                                np.array([hi], dtype=np.int64), np.array([float(t0)]))[0, 0]


def aggregate_numeric(series, window) -> dict[str, float]:
    """Mean, min, max, population std and least-squares slope (units/s)."""
    return dict(zip(NUMERIC_AGGS, map(float, _stats_in_window(series, window))))


def aggregate_binary(series, window) -> dict[str, float]:
    """Fraction of ones and least-squares slope of a 0/1 series."""
    s = _stats_in_window(series, window)
    return {"mean": float(s[0]), "slope": float(s[4])}


# -- feature names --------------------------------------------------------------

def _numeric(prefix: str) -> list[str]:
    return [f"{prefix}.{a}" for a in NUMERIC_AGGS]


def _binary(prefix: str) -> list[str]:
    return [f"{prefix}.{a}" for a in BINARY_AGGS]


def _ego_names(c: Constants) -> list[str]:
    names = ["ego.frames.present"]
    names += _numeric("ego.face_count")
    for cls in c.classes:
        names += _binary(f"ego.presence.{cls}")
    for cls in c.classes:
        names += _numeric(f"ego.pixels.{cls}")
    for cls in c.classes:
        names += _numeric(f"ego.instances.{cls}")
    for s in c.scenes:
        names += _binary(f"ego.scene.{s}")
    for m in ("saliency", "objectness", "depth"):
        for st in MAP_STATS:
            names += _numeric(f"ego.{m}.{st}")
    names.append("ego.head_imu.present")
    for sensor in ("accel", "gyro"):
        for ax in _AXES:
            names += _numeric(f"ego.head_imu.{sensor}.{ax}")
    return names


def _phone_names(c: Constants) -> list[str]:
    names = ["phone.imu.present"]
    for sensor in ("accel", "gyro", "orientation"):
        for ax in _AXES:
            names += _numeric(f"phone.imu.{sensor}.{ax}")
    names.append("phone.events.present")
    names += _binary("phone.touch")
    names += _binary("phone.screen")
    for app in c.apps:
        names += _binary(f"phone.app.{app}")
    return names


def _gaze_names() -> list[str]:
    names = ["gaze.fixations.present"]
    for ch in ("x", "y", "norm"):
        names += _numeric(f"gaze.fixation.{ch}")
    names.append("gaze.at.present")
    for ch in ("saliency", "objectness", "depth", "norm"):
        names += _numeric(f"gaze.at.{ch}")
    return names


def _block_names(c: Constants) -> dict[str, list[str]]:
    return {"ego": _ego_names(c), "phone": _phone_names(c), "gaze": _gaze_names()}


def feature_names(constants: Constants, group: FeatureGroup) -> tuple[str, ...]:
    blocks = _block_names(constants)
    return tuple(n for b in FeatureGroup(group).blocks for n in blocks[b])


# -- batched extraction -----------------------------------------------------------

def _norm3(v: np.ndarray) -> np.ndarray:
    return np.sqrt((v * v).sum(axis=1))


def _window_bounds(t: np.ndarray, t0: np.ndarray, t1: np.ndarray):
    return (np.searchsorted(t, t0, "left").astype(np.int64),
            np.searchsorted(t, t1, "left").astype(np.int64))


def _pick(stats: np.ndarray, binary_mask: np.ndarray) -> np.ndarray:
    """Flatten (W, C, 5) stats to the per-channel aggregate layout."""
    cols = []
    for c in range(stats.shape[1]):
        if binary_mask[c]:
            cols.append(stats[:, c, [0, 4]])
        else:
            cols.append(stats[:, c, :])
    return np.concatenate(cols, axis=1) if cols else np.zeros((stats.shape[0], 0))


class _StateTrack:
    """Piecewise-constant 0/1 state from on/off events."""

    def __init__(self, times: list[float], states: list[int]):
        self.t = np.asarray(times, dtype=float)
        self.s = np.asarray(states, dtype=float)
        # Before the first event the state is the opposite of that event.
        self.initial = 1.0 - self.s[0] if len(self.s) else 0.0

    def sample(self, ticks: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.t, ticks, "right") - 1
        out = np.where(idx >= 0, self.s[np.clip(idx, 0, None)] if len(self.s) else 0.0, self.initial)
        return out.astype(float)


class FeatureExtractor:
    """Batched feature extraction over one recording.

    Rows are cached by window end time, so extracting overlapping sets of
    windows (several tasks on one recording) only computes each row once.
    """

    def __init__(self, rec: Recording, fixation_params: FixationParams = FixationParams(),
                 event_rate: float = EVENT_GRID_HZ):
        self.rec = rec
        self.constants = rec.constants
        self.event_rate = float(event_rate)
        self._blocks = _block_names(rec.constants)
        self.all_names = tuple(self._blocks["ego"] + self._blocks["phone"] + self._blocks["gaze"])
        self._range = rec.time_range()
        self._cache: dict[tuple[float, float], np.ndarray] = {}
        self._prepare_frames()
        self._prepare_imu()
        self._prepare_events()
        self._prepare_gaze(fixation_params)

    # preparation ---------------------------------------------------------

    def _prepare_frames(self):
        fr = self.rec.frames
        C = len(self.constants.classes)
        S = len(self.constants.scenes)
        cols = [fr.face_count[:, None].astype(float), fr.class_presence.astype(float),
                fr.class_pixel_counts.astype(float), fr.class_instance_counts.astype(float),
                fr.scene_class.astype(float), fr.saliency, fr.objectness, fr.depth]
        self._frame_t = np.ascontiguousarray(fr.t, dtype=float)
        self._frame_v = np.ascontiguousarray(np.concatenate(cols, axis=1), dtype=float)
        self._frame_binary = np.zeros(self._frame_v.shape[1], dtype=bool)
        self._frame_binary[1:1 + C] = True
        self._frame_binary[1 + 3 * C:1 + 3 * C + S] = True

    def _prepare_imu(self):
        h = self.rec.head_imu
        self._head_t = np.ascontiguousarray(h.t, dtype=float)
        self._head_v = np.ascontiguousarray(np.concatenate(
            [h.accel, _norm3(h.accel)[:, None], h.gyro, _norm3(h.gyro)[:, None]], axis=1), dtype=float)
        p = self.rec.phone_imu
        ori = p.orientation if p.orientation is not None else np.zeros((len(p), 3))
        self._phone_t = np.ascontiguousarray(p.t, dtype=float)
        self._phone_v = np.ascontiguousarray(np.concatenate(
            [p.accel, _norm3(p.accel)[:, None], p.gyro, _norm3(p.gyro)[:, None],
             ori, _norm3(ori)[:, None]], axis=1), dtype=float)

    def _prepare_events(self):
        events = self.rec.phone_events
        self._event_t = np.array([e.t for e in events], dtype=float)
        self._touch_t = np.array([e.t for e in events if e.kind == EventKind.TOUCH], dtype=float)
        st, ss = [], []
        apps = {a: ([], []) for a in self.constants.apps}
        for e in events:
            if e.kind == EventKind.SCREEN_ON:
                st.append(e.t)
                ss.append(1)
            elif e.kind == EventKind.SCREEN_OFF:
                st.append(e.t)
                ss.append(0)
            elif e.kind in (EventKind.APP_START, EventKind.APP_STOP) and e.app_id in apps:
                apps[e.app_id][0].append(e.t)
                apps[e.app_id][1].append(1 if e.kind == EventKind.APP_START else 0)
        self._screen = _StateTrack(st, ss)
        self._apps = [_StateTrack(*apps[a]) for a in self.constants.apps]

    def _prepare_gaze(self, params: FixationParams):
        rec = self.rec
        ts, te, cx, cy = fixation_arrays(rec.gaze, params)
        self._fix_start = ts
        self._fix_end = te
        mid = (ts + te) / 2.0
        self._fix_t = np.ascontiguousarray(mid, dtype=float)
        self._fix_v = np.ascontiguousarray(np.stack([cx, cy, np.hypot(cx, cy)], axis=1), dtype=float)

        # At-gaze values: map cell under each fixation centroid, using the
        # last frame at or before the fixation midpoint.
        fr = rec.frames
        keep = []
        vals = []
        if len(fr) and fr.maps.shape[0]:
            fidx = np.searchsorted(fr.t, mid, "right") - 1
            for k in range(mid.shape[0]):
                i = int(fidx[k])
                if i < 0:
                    continue
                refs = (fr.saliency_map[i], fr.objectness_map[i], fr.depth_map[i])
                if min(refs) < 0:
                    continue
                try:
                    row, col = grid_cell(cx[k], cy[k], self.constants.fov_deg, self.constants.map_grid)
                except OutOfField:
                    continue
                s, o, d = (float(fr.maps[r, row, col]) for r in refs)
                keep.append(k)
                vals.append((s, o, d, math.sqrt(s * s + o * o + d * d)))
        keep = np.asarray(keep, dtype=np.int64)
        self._at_start = ts[keep] if keep.size else np.zeros(0)
        self._at_end = te[keep] if keep.size else np.zeros(0)
        self._at_t = np.ascontiguousarray(mid[keep] if keep.size else np.zeros(0), dtype=float)
        self._at_v = np.ascontiguousarray(np.array(vals, dtype=float).reshape(-1, 4))

    # extraction ----------------------------------------------------------

    def _numeric_block(self, t, v, t0, t1, binary=None):
        lo, hi = _window_bounds(t, t0, t1)
        if v.shape[1] == 0:
            return (hi > lo).astype(float), np.zeros((t0.shape[0], 0))
        stats = kernels.window_stats(t, v, lo, hi, np.ascontiguousarray(t0))
        if binary is None:
            binary = np.zeros(v.shape[1], dtype=bool)
        return (hi > lo).astype(float), _pick(stats, binary)

    def _interval_block(self, start, end, t, v, t0, t1):
        # Fixations overlapping [t0, t1): end >= t0 and start < t1.
        lo = np.searchsorted(end, t0, "left").astype(np.int64)
        hi = np.searchsorted(start, t1, "left").astype(np.int64)
        hi = np.maximum(hi, lo)
        stats = kernels.window_stats(t, v, lo, hi, np.ascontiguousarray(t0))
        return (hi > lo).astype(float), _pick(stats, np.zeros(v.shape[1], dtype=bool))

    def _event_block(self, t0, t1):
        n_ticks = max(1, int(math.ceil((t1[0] - t0[0]) * self.event_rate - 1e-9)))
        offs = np.arange(n_ticks) / self.event_rate
        ticks = t0[:, None] + offs[None, :]
        valid = ticks < t1[:, None]
        ticks_flat = ticks.ravel()
        dt = 1.0 / self.event_rate
        tc = offs - offs.mean()
        denom = float((tc * tc).sum())

        def agg(grid):
            g = np.where(valid, grid, 0.0)
            n = valid.sum(axis=1)
            mean = g.sum(axis=1) / n
            if denom > 0:
                slope = ((g - mean[:, None]) * np.where(valid, tc[None, :], 0.0)).sum(axis=1) / denom
            else:
                slope = np.zeros_like(mean)
            return np.stack([mean, slope], axis=1)

        a = np.searchsorted(self._touch_t, ticks_flat, "left")
        b = np.searchsorted(self._touch_t, ticks_flat + dt, "left")
        touch = (b > a).astype(float).reshape(ticks.shape)
        cols = [agg(touch), agg(self._screen.sample(ticks_flat).reshape(ticks.shape))]
        for app in self._apps:
            cols.append(agg(app.sample(ticks_flat).reshape(ticks.shape)))
        lo, hi = _window_bounds(self._event_t, t0, t1)
        return (hi > lo).astype(float), np.concatenate(cols, axis=1)

    def _compute(self, t0: np.ndarray, t1: np.ndarray) -> np.ndarray:
        p_fr, f_fr = self._numeric_block(self._frame_t, self._frame_v, t0, t1, self._frame_binary)
        p_hd, f_hd = self._numeric_block(self._head_t, self._head_v, t0, t1)
        p_ph, f_ph = self._numeric_block(self._phone_t, self._phone_v, t0, t1)
        p_ev, f_ev = self._event_block(t0, t1)
        p_fx, f_fx = self._interval_block(self._fix_start, self._fix_end, self._fix_t, self._fix_v, t0, t1)
        p_at, f_at = self._interval_block(self._at_start, self._at_end, self._at_t, self._at_v, t0, t1)
        out = np.concatenate([
            p_fr[:, None], f_fr, p_hd[:, None], f_hd,
            p_ph[:, None], f_ph, p_ev[:, None], f_ev,
            p_fx[:, None], f_fx, p_at[:, None], f_at,
        ], axis=1)
        assert out.shape[1] == len(self.all_names)
        return out

    def _check_range(self, t0: np.ndarray, t1: np.ndarray):
        lo, hi = self._range
        bad = (t0 < lo) | (t1 > hi) | ~(t1 > t0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise WindowOutOfRange(f"window [{t0[i]}, {t1[i]}) outside recording range [{lo}, {hi}]")

    def matrix(self, t_ends: Sequence[float], width: float = DEFAULT_FEATURE_WINDOW,
               group: FeatureGroup = FeatureGroup.PROPOSED_PLUS_GAZE) -> np.ndarray:
        """Feature rows for windows ``[t_end - width, t_end)``."""
        t_ends = np.asarray(t_ends, dtype=float).reshape(-1)
        t0 = t_ends - width
        self._check_range(t0, t_ends)
        keys = [(float(t), float(width)) for t in t_ends]
        todo = sorted({k for k in keys if k not in self._cache})
        if todo:
            te = np.array([k[0] for k in todo])
            rows = self._compute(te - width, te)
            for k, r in zip(todo, rows):
                self._cache[k] = r
        full = np.stack([self._cache[k] for k in keys]) if keys else np.zeros((0, len(self.all_names)))
        return full[:, self.column_index(group)]

    def column_index(self, group: FeatureGroup) -> np.ndarray:
        sizes = {b: len(n) for b, n in self._blocks.items()}
        offsets = {"ego": 0, "phone": sizes["ego"], "gaze": sizes["ego"] + sizes["phone"]}
        idx = [np.arange(offsets[b], offsets[b] + sizes[b]) for b in FeatureGroup(group).blocks]
        return np.concatenate(idx)

    def names(self, group: FeatureGroup) -> tuple[str, ...]:
        return feature_names(self.constants, group)

    def extract(self, window: tuple[float, float], group: FeatureGroup) -> FeatureVector:
        t0, t1 = map(float, window)
        self._check_range(np.array([t0]), np.array([t1]))
        row = self._compute(np.array([t0]), np.array([t1]))[0]
        return FeatureVector(self.names(group), row[self.column_index(group)])


def extract(rec: Recording, window: tuple[float, float], group: FeatureGroup) -> FeatureVector:
    """Feature vector of ``group`` over ``window`` = (t0, t1)."""
    return FeatureExtractor(rec).extract(window, group)


def extract_many(rec: Recording, t_ends: Iterable[float], group: FeatureGroup,
                 width: float = DEFAULT_FEATURE_WINDOW) -> tuple[tuple[str, ...], np.ndarray]:
    fx = FeatureExtractor(rec)
    return fx.names(group), fx.matrix(list(t_ends), width, group)
