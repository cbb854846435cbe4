"""Attention timeline queries, shift events and corpus summary statistics."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .gaze import FixationParams, fixation_arrays
from .recording import (
    AnnotationTrack, Attention, Environment, Locomotion, Recording, SegmentKind,
)


class Direction(str, Enum):
    TO_ENVIRONMENT = "to_environment"
    TO_DEVICE = "to_device"


UNANNOTATED = "unannotated"


class ShiftEvent(NamedTuple):
    t: float
    direction: Direction


def _starts(track: AnnotationTrack) -> list[float]:
    return [iv.start for iv in track]


def interval_index(track: AnnotationTrack, t: float) -> int:
    """Index of the half-open interval containing ``t``, or -1."""
    i = bisect.bisect_right(_starts(track), t) - 1
    if i >= 0 and t < track[i].end:
        return i
    return -1


def attention_at(track: AnnotationTrack, t: float):
    """Attention.DEVICE / Attention.ENVIRONMENT, or ``UNANNOTATED``."""
    i = interval_index(track, t)
    return track[i].attention if i >= 0 else UNANNOTATED


def spans(track: AnnotationTrack) -> list[tuple[float, float]]:
    """Maximal runs of contiguous intervals, as (start, end)."""
    out: list[list[float]] = []
    for iv in track:
        if out and iv.start == out[-1][1]:
            out[-1][1] = iv.end
        else:
            out.append([iv.start, iv.end])
    return [(a, b) for a, b in out]


def shift_events(track: AnnotationTrack) -> list[ShiftEvent]:
    out = []
    for prev, cur in zip(track, list(track)[1:]):
        if cur.start != prev.end or cur.attention == prev.attention:
            continue
        d = Direction.TO_ENVIRONMENT if cur.attention == Attention.ENVIRONMENT else Direction.TO_DEVICE
        out.append(ShiftEvent(cur.start, d))
    return out


# -- summary statistics -------------------------------------------------------

ROWS = {
    "working_segments": ("working_time", "working_time_on_device"),
    "waiting_segments": ("waiting_time", "waiting_time_on_device"),
    "attention_shifts": ("to_environment", "to_device"),
    "attention_time": ("on_device", "off_device"),
    "fixation_time": ("on_screen", "off_screen"),
    "environments": tuple(e.value for e in Environment),
    "indoor_outdoor": ("indoor", "outdoor"),
    "locomotion": tuple(m.value for m in Locomotion),
}
# Rows reported per segment (mean/std over all segments) rather than per participant.
PER_SEGMENT_FAMILIES = ("working_segments", "waiting_segments")


def _overlap(a0, a1, b0, b1) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


def participant_stats(rec: Recording, fixation_params: FixationParams = FixationParams()) -> dict:
    """Raw per-participant quantities behind the summary table.

    Per-segment lists are kept so the segment rows can report statistics
    over segments.
    """
    track = rec.annotations
    ev = shift_events(track)
    stats = {
        "attention_shifts": {
            "to_environment": sum(e.direction == Direction.TO_ENVIRONMENT for e in ev),
            "to_device": sum(e.direction == Direction.TO_DEVICE for e in ev),
        },
        "attention_time": {"on_device": 0.0, "off_device": 0.0},
        "environments": {e.value: 0.0 for e in Environment},
        "indoor_outdoor": {"indoor": 0.0, "outdoor": 0.0},
        "locomotion": {m.value: 0.0 for m in Locomotion},
    }
    for iv in track:
        dur = iv.end - iv.start
        key = "on_device" if iv.attention == Attention.DEVICE else "off_device"
        stats["attention_time"][key] += dur
        stats["environments"][Environment(iv.environment).value] += dur
        stats["indoor_outdoor"]["indoor" if iv.indoor else "outdoor"] += dur
        stats["locomotion"][Locomotion(iv.locomotion).value] += dur

    segs = {SegmentKind.WORKING: ([], []), SegmentKind.WAITING: ([], [])}
    device = [iv for iv in track if iv.attention == Attention.DEVICE]
    for s in rec.segments:
        on = sum(_overlap(s.start, s.end, iv.start, iv.end) for iv in device)
        segs[SegmentKind(s.kind)][0].append(s.end - s.start)
        segs[SegmentKind(s.kind)][1].append(on)
    stats["working_segments"] = {"working_time": segs[SegmentKind.WORKING][0],
                                 "working_time_on_device": segs[SegmentKind.WORKING][1]}
    stats["waiting_segments"] = {"waiting_time": segs[SegmentKind.WAITING][0],
                                 "waiting_time_on_device": segs[SegmentKind.WAITING][1]}

    # Fixation time split by the annotated attention target.
    on = off = 0.0
    if len(rec.gaze):
        ts, te, _, _ = fixation_arrays(rec.gaze, fixation_params)
        for a, b in zip(ts.tolist(), te.tolist()):
            for iv in track:
                o = _overlap(a, b, iv.start, iv.end)
                if o > 0:
                    if iv.attention == Attention.DEVICE:
                        on += o
                    else:
                        off += o
    stats["fixation_time"] = {"on_screen": on, "off_screen": off}
    return stats


@dataclass(frozen=True)
class SummaryStats:
    """Per-participant values plus mean/std/total for each row family.

    ``table[family][row]`` is ``{"mean", "std", "total"}``. For the
    working/waiting families mean and std run over individual segments;
    for all others over participants. Std is the population std.
    """

    participants: dict = field(default_factory=dict)
    table: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"participants": self.participants, "table": self.table}


def _agg(values: Sequence[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return {"mean": 0.0, "std": 0.0, "total": 0.0}
    return {"mean": float(arr.mean()), "std": float(arr.std()), "total": float(arr.sum())}


def summarize(recordings: Sequence[Recording], fixation_params: FixationParams = FixationParams()) -> SummaryStats:
    per = {r.participant_id: participant_stats(r, fixation_params) for r in recordings}
    pids = sorted(per)
    table: dict = {}
    for family, rows in ROWS.items():
        table[family] = {}
        for row in rows:
            if family in PER_SEGMENT_FAMILIES:
                vals = [v for p in pids for v in per[p][family][row]]
            else:
                vals = [per[p][family][row] for p in pids]
            table[family][row] = _agg(vals)
    participants = {}
    for p in pids:
        d = {}
        for family, rows in ROWS.items():
            if family in PER_SEGMENT_FAMILIES:
                d[family] = {row: float(sum(per[p][family][row])) for row in rows}
            else:
                d[family] = {row: per[p][family][row] for row in rows}
        participants[p] = d
    return SummaryStats(participants=participants, table=table)
