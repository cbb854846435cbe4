"""Fixation detection (I-DT) and scene-map lookup at gaze positions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._accel import kernels
from .errors import MapsAbsent, OutOfField
from .recording import FrameFeatures, GazeStream, GazeSample

# Invalid runs longer than this end a growing fixation window.
MAX_INVALID_GAP = 0.05


@dataclass(frozen=True)
class FixationParams:
    dispersion_threshold: float = 1.0
    min_duration: float = 0.150
    max_invalid_gap: float = MAX_INVALID_GAP

    def __post_init__(self):
        if not (self.dispersion_threshold > 0 and self.min_duration > 0):
            raise ValueError("fixation thresholds must be strictly positive")
        if self.max_invalid_gap < 0:
            raise ValueError("max_invalid_gap must be non-negative")


class Fixation(NamedTuple):
    t_start: float
    t_end: float
    cx: float
    cy: float


def _as_stream(gaze) -> GazeStream:
    if isinstance(gaze, GazeStream):
        return gaze
    return GazeStream.from_samples(GazeSample(*s) for s in gaze)


def fixation_indices(gaze: GazeStream, params: FixationParams = FixationParams()):
    """First/last member sample index of each fixation."""
    if len(gaze) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    x = np.where(gaze.valid, gaze.x, 0.0)
    y = np.where(gaze.valid, gaze.y, 0.0)
    return kernels.idt_fixations(
        np.ascontiguousarray(gaze.t, dtype=np.float64), x, y,
        np.ascontiguousarray(gaze.valid, dtype=np.bool_),
        float(params.dispersion_threshold), float(params.min_duration),
        float(params.max_invalid_gap),
    )


def fixation_arrays(gaze: GazeStream, params: FixationParams = FixationParams()):
    """Fixations as column arrays (t_start, t_end, cx, cy)."""
    starts, ends = fixation_indices(gaze, params)
    n = starts.shape[0]
    cx = np.empty(n)
    cy = np.empty(n)
    for k in range(n):
        sl = slice(starts[k], ends[k] + 1)
        v = gaze.valid[sl]
        cx[k] = gaze.x[sl][v].mean()
        cy[k] = gaze.y[sl][v].mean()
    return gaze.t[starts], gaze.t[ends], cx, cy


def detect_fixations(gaze, params: FixationParams = FixationParams()) -> list[Fixation]:
    """Detect fixations with the dispersion-threshold (I-DT) rule.

    A window of valid samples is a fixation when
    ``(max x - min x) + (max y - min y) <= params.dispersion_threshold`` and
    it spans at least ``params.min_duration`` seconds. Windows grow
    greedily, one sample at a time, from the leftmost unassigned valid
    sample. Runs of invalid samples are bridged unless the time from the
    first invalid sample to the next valid one exceeds
    ``params.max_invalid_gap``. Centroids average valid members only.

    ``gaze`` may be a :class:`GazeStream` or an iterable of
    ``(t, x, y, valid)`` tuples.
    """
    ts, te, cx, cy = fixation_arrays(_as_stream(gaze), params)
    return [Fixation(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(ts, te, cx, cy)]


def grid_cell(x: float, y: float, fov_deg: float = 175.0, grid: int = 32) -> tuple[int, int]:
    """(row, col) of the map cell containing gaze angle (x, y).

    Row 0 is the top edge (+y), column 0 the left edge (-x). Points exactly
    on the far edges fall in the last row/column.
    """
    half = fov_deg / 2.0
    if not (-half <= x <= half and -half <= y <= half):
        raise OutOfField(f"gaze ({x:.3f}, {y:.3f}) deg outside +/-{half} deg field of view")
    cell = fov_deg / grid
    col = min(int((x + half) // cell), grid - 1)
    row = min(int((half - y) // cell), grid - 1)
    return row, col


def at_gaze(frame: FrameFeatures, x: float, y: float, fov_deg: float = 175.0) -> dict[str, float]:
    """Saliency, objectness and depth of the cell under the gaze point."""
    grids = {"saliency": frame.saliency_map, "objectness": frame.objectness_map, "depth": frame.depth_map}
    missing = [k for k, g in grids.items() if g is None]
    if missing:
        raise MapsAbsent(f"frame at t={frame.t} lacks maps: {', '.join(missing)}")
    n = grids["saliency"].shape[0]
    row, col = grid_cell(x, y, fov_deg, n)
    return {k: float(g[row, col]) for k, g in grids.items()}
