"""Reference labeller written against the raw annotation list.

Kept free of imports from the example/timeline code it is used to check.
"""

from __future__ import annotations

from ..errors import OutOfRange

_TASKS = ("shift_to_environment", "shift_to_device", "primary_focus")


def oracle_label(rec, task, t_ref: float, target_window: float) -> dict:
    """Eligibility and label of one (task, t_ref, target window) by linear scan."""
    task = getattr(task, "value", task)
    if task not in _TASKS:
        raise ValueError(f"unknown task {task!r}")
    ivs = list(rec.annotations.intervals)
    lo, hi = rec.time_range()
    end = t_ref + target_window
    if t_ref < lo or end > hi:
        raise OutOfRange(f"[{t_ref}, {end}] outside recording [{lo}, {hi}]")

    current = None
    for iv in ivs:
        if iv.start <= t_ref < iv.end:
            current = iv
            break
    if current is None:
        return {"eligible": False, "label": False}
    state = getattr(current.attention, "value", current.attention)

    if task == "primary_focus":
        on = 0.0
        for iv in ivs:
            if getattr(iv.attention, "value", iv.attention) != "device":
                continue
            a = max(iv.start, t_ref)
            b = min(iv.end, end)
            if b > a:
                on += b - a
        return {"eligible": True, "label": on > 0.5 * target_window}

    want_from, want_to = ("device", "environment") if task == "shift_to_environment" else ("environment", "device")
    if state != want_from:
        return {"eligible": False, "label": False}
    label = False
    for prev, cur in zip(ivs, ivs[1:]):
        if cur.start != prev.end:
            continue
        a = getattr(prev.attention, "value", prev.attention)
        b = getattr(cur.attention, "value", cur.attention)
        if a == want_from and b == want_to and t_ref < cur.start <= end:
            label = True
            break
    return {"eligible": True, "label": label}
