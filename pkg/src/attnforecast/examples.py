"""Labelled prediction examples, class balancing and leave-one-person-out folds."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import SingleClass, TooFewParticipants
from .features import DEFAULT_FEATURE_WINDOW, FeatureExtractor, FeatureGroup, FeatureVector
from .recording import Attention, Recording, SegmentKind
from .timeline import Direction, shift_events, spans


class Task(str, Enum):
    SHIFT_TO_ENVIRONMENT = "shift_to_environment"
    SHIFT_TO_DEVICE = "shift_to_device"
    PRIMARY_FOCUS = "primary_focus"


DEFAULT_TARGET_WINDOW = {
    Task.SHIFT_TO_ENVIRONMENT: 1.0,
    Task.SHIFT_TO_DEVICE: 10.0,
    Task.PRIMARY_FOCUS: 5.0,
}
TARGET_WINDOWS = (1.0, 5.0, 10.0)


@dataclass(frozen=True)
class TaskConfig:
    task: Task
    target_window: float | None = None
    feature_window: float = DEFAULT_FEATURE_WINDOW
    stride: float = 0.5
    allow_any_target: bool = False

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        if self.target_window is None:
            object.__setattr__(self, "target_window", DEFAULT_TARGET_WINDOW[self.task])
        for name in ("target_window", "feature_window", "stride"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.allow_any_target and float(self.target_window) not in TARGET_WINDOWS:
            raise ValueError(f"target_window must be one of {TARGET_WINDOWS}, got {self.target_window}")

    def to_json(self) -> dict:
        return {"task": self.task.value, "target_window": self.target_window,
                "feature_window": self.feature_window, "stride": self.stride}


@dataclass(frozen=True, eq=False)
class Example:
    participant_id: str
    t_ref: float
    features: FeatureVector
    label: bool
    segment_kind: SegmentKind
    environment: str
    task: Task

    def to_json(self) -> dict:
        return {"participant_id": self.participant_id, "t_ref": self.t_ref, "task": self.task.value,
                "label": self.label, "segment_kind": SegmentKind(self.segment_kind).value,
                "environment": self.environment, "features": self.features.values.tolist()}


def _grid_range(lo: float, hi: float, stride: float) -> list[float]:
    """Multiples of ``stride`` inside [lo, hi]."""
    k0 = math.ceil(lo / stride - 1e-9)
    k1 = math.floor(hi / stride + 1e-9)
    out = []
    for k in range(k0, k1 + 1):
        t = k * stride
        if lo <= t <= hi:
            out.append(t)
    return out


class _Timeline:
    """Precomputed lookups over one annotation track."""

    def __init__(self, rec: Recording):
        self.track = rec.annotations
        self.starts = [iv.start for iv in self.track]
        ev = shift_events(self.track)
        self.to_env = [e.t for e in ev if e.direction == Direction.TO_ENVIRONMENT]
        self.to_dev = [e.t for e in ev if e.direction == Direction.TO_DEVICE]

    def interval(self, t: float):
        i = bisect.bisect_right(self.starts, t) - 1
        if i >= 0 and t < self.track[i].end:
            return self.track[i]
        return None

    @staticmethod
    def any_in(times: list[float], a: float, b: float) -> bool:
        """True if some time lies in (a, b]."""
        i = bisect.bisect_right(times, a)
        return i < len(times) and times[i] <= b

    def device_time(self, a: float, b: float) -> float:
        total = 0.0
        i = max(bisect.bisect_right(self.starts, a) - 1, 0)
        while i < len(self.track) and self.track[i].start < b:
            iv = self.track[i]
            if iv.attention == Attention.DEVICE:
                total += max(0.0, min(iv.end, b) - max(iv.start, a))
            i += 1
        return total


def candidate_refs(rec: Recording, cfg: TaskConfig) -> list[tuple[float, object]]:
    """Stride-grid reference times whose feature and target windows fit one span and one segment.

    Returns (t_ref, segment) pairs in time order.
    """
    fw, tw = cfg.feature_window, cfg.target_window
    out = []
    sp = spans(rec.annotations)
    for seg in rec.segments:
        for a, b in sp:
            lo = max(a, seg.start) + fw
            hi = min(b, seg.end) - tw
            if hi < lo:
                continue
            out.extend((t, seg) for t in _grid_range(lo, hi, cfg.stride))
    out.sort(key=lambda p: p[0])
    return out


def label_refs(rec: Recording, cfg: TaskConfig, refs: Iterable[float]) -> list[tuple[float, bool, object]]:
    """Eligible (t_ref, label, interval) triples for the task."""
    tl = _Timeline(rec)
    tw = cfg.target_window
    out = []
    for t in refs:
        iv = tl.interval(t)
        if iv is None:
            continue
        if cfg.task == Task.SHIFT_TO_ENVIRONMENT:
            if iv.attention != Attention.DEVICE:
                continue
            label = tl.any_in(tl.to_env, t, t + tw)
        elif cfg.task == Task.SHIFT_TO_DEVICE:
            if iv.attention != Attention.ENVIRONMENT:
                continue
            label = tl.any_in(tl.to_dev, t, t + tw)
        else:
            label = tl.device_time(t, t + tw) > 0.5 * tw
        out.append((t, bool(label), iv))
    return out


def generate(rec: Recording, cfg: TaskConfig, group: FeatureGroup,
             extractor: FeatureExtractor | None = None) -> list[Example]:
    """All examples of ``cfg.task`` in ``rec`` with ``group`` features.

    Eligibility uses the half-open interval containing ``t_ref``; the
    target window is ``(t_ref, t_ref + target_window]``.
    """
    cands = candidate_refs(rec, cfg)
    seg_of = {t: seg for t, seg in cands}
    labelled = label_refs(rec, cfg, [t for t, _ in cands])
    if not labelled:
        return []
    fx = extractor if extractor is not None else FeatureExtractor(rec)
    names = fx.names(group)
    X = fx.matrix([t for t, _, _ in labelled], cfg.feature_window, group)
    out = []
    for (t, label, iv), row in zip(labelled, X):
        out.append(Example(
            participant_id=rec.participant_id, t_ref=t, features=FeatureVector(names, row),
            label=label, segment_kind=SegmentKind(seg_of[t].kind),
            environment=str(getattr(iv.environment, "value", iv.environment)), task=cfg.task,
        ))
    return out


def balance(examples: Sequence[Example], seed: int) -> list[Example]:
    """Undersample the majority class to the minority count.

    Selection is uniform without replacement and deterministic for a seed;
    the kept examples retain their input order.
    """
    labels = np.array([e.label for e in examples], dtype=bool)
    pos = np.flatnonzero(labels)
    neg = np.flatnonzero(~labels)
    if pos.size == 0 or neg.size == 0:
        raise SingleClass(f"need both classes, got {pos.size} positive / {neg.size} negative")
    minority, majority = (pos, neg) if pos.size <= neg.size else (neg, pos)
    rng = np.random.default_rng(seed)
    picked = rng.choice(majority, size=minority.size, replace=False)
    keep = np.sort(np.concatenate([minority, picked]))
    return [examples[i] for i in keep]


def lopo_folds(examples: Sequence[Example]) -> list[tuple[list[Example], list[Example]]]:
    pids = sorted({e.participant_id for e in examples})
    if len(pids) < 2:
        raise TooFewParticipants(f"leave-one-person-out needs >= 2 participants, got {len(pids)}")
    folds = []
    for p in pids:
        train = [e for e in examples if e.participant_id != p]
        test = [e for e in examples if e.participant_id == p]
        folds.append((train, test))
    return folds


def to_arrays(examples: Sequence[Example]) -> tuple[np.ndarray, np.ndarray]:
    if not examples:
        return np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
    X = np.stack([e.features.values for e in examples])
    y = np.array([int(e.label) for e in examples], dtype=np.int64)
    return X, y
