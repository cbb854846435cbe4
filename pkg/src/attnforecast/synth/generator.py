"""Synthetic multi-participant corpora with planted attention cues.

Each participant gets a session with chat blocks (six working and five
waiting segments each), an alternating Device/Environment attention
timeline drawn from log-normal dwell times inside the blocks, and sensor
streams at nominal rates. Baseline streams are independent of the
timeline. With probability ``cue_probability`` each shift gets a cue that
starts ``lead`` seconds before it:

* shift to the device: phone IMU variance burst over ``[s - lead, s)`` and
  a ScreenOn event at ``s - lead`` (the screen goes off again a few
  seconds after attention next leaves the device);
* shift to the environment: face count raised over ``[s - lead, s)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..recording import (
    AnnotationInterval, AnnotationTrack, Attention, Constants, Environment, EventKind,
    FrameStream, GazeStream, ImuStream, Locomotion, MAP_STATS, PhoneEvent, Recording,
    Segment, SegmentKind, SegmentSchedule, save_recording,
)

GAZE_HZ = 30.0
IMU_HZ = 100.0
FRAME_HZ = 24.0
WORKING_MEAN, WORKING_STD = 40.29, 11.27
WAITING_CHOICES = (10.0, 15.0, 20.0, 30.0, 45.0)
ENV_WEIGHTS = {  # share of annotated time per environment
    Environment.CAFE: 235, Environment.CORRIDOR: 248, Environment.LIBRARY: 231,
    Environment.CANTEEN: 170, Environment.OFFICE: 457, Environment.STREET: 80,
}
LOCOMOTION_WEIGHTS = {Locomotion.SIT: 1249, Locomotion.STAND: 104, Locomotion.WALK: 91}
N_MAPS = 12
SCREEN_TIMEOUT = (1.0, 4.0)


@dataclass(frozen=True)
class NoiseLevels:
    gaze_deg: float = 0.15
    gaze_invalid_rate: float = 0.02
    accel: float = 0.3
    gyro: float = 0.05
    orientation_step: float = 0.05
    face_rate: float = 0.3
    touch_rate: float = 0.5


@dataclass(frozen=True)
class SynthConfig:
    n_participants: int = 10
    session_length: float = 1800.0
    device_dwell: tuple[float, float] = (20.0, 0.6)
    environment_dwell: tuple[float, float] = (6.0, 0.6)
    cue_probability: float = 0.0
    cue_lead: tuple[float, float] = (0.5, 2.0)
    noise: NoiseLevels = field(default_factory=NoiseLevels)
    n_blocks: int = 12
    seed: int = 0
    face_cue_strength: int = 3
    burst_accel: float = 4.0
    burst_gyro: float = 1.5

    def __post_init__(self):
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseLevels(**self.noise))
        for name in ("device_dwell", "environment_dwell", "cue_lead"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        self.check()

    def check(self) -> None:
        if int(self.n_participants) < 1:
            raise ConfigError("n_participants must be >= 1")
        if not self.session_length > 0:
            raise ConfigError("session_length must be positive")
        if int(self.n_blocks) < 1:
            raise ConfigError("n_blocks must be >= 1")
        for name in ("device_dwell", "environment_dwell"):
            med, sigma = getattr(self, name)
            if not (med > 0 and sigma >= 0):
                raise ConfigError(f"{name} needs median > 0 and sigma >= 0")
        if not 0.0 <= self.cue_probability <= 1.0:
            raise ConfigError("cue_probability must lie in [0, 1]")
        lo, hi = self.cue_lead
        if not (0 < lo <= hi):
            raise ConfigError("cue_lead must satisfy 0 < low <= high")
        n = self.noise
        if not (0.0 <= n.gaze_invalid_rate <= 1.0):
            raise ConfigError("gaze_invalid_rate must lie in [0, 1]")
        if min(n.gaze_deg, n.accel, n.gyro, n.orientation_step, n.face_rate, n.touch_rate) < 0:
            raise ConfigError("noise levels must be non-negative")

    def to_json(self) -> dict:
        d = asdict(self)
        d["device_dwell"] = list(self.device_dwell)
        d["environment_dwell"] = list(self.environment_dwell)
        d["cue_lead"] = list(self.cue_lead)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SynthConfig":
        return cls(**d)


def participant_id(index: int) -> str:
    return f"P{index + 1:02d}"


def _ms(x) -> float:
    return round(float(x), 3)


def _choice(rng, weights: dict):
    keys = list(weights)
    p = np.array([weights[k] for k in keys], dtype=float)
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


# -- schedule and timeline ------------------------------------------------------------

def _block_durations(rng) -> list[tuple[SegmentKind, float]]:
    out = []
    for q in range(6):
        out.append((SegmentKind.WORKING, max(5.0, rng.normal(WORKING_MEAN, WORKING_STD))))
        if q < 5:
            out.append((SegmentKind.WAITING, float(rng.choice(WAITING_CHOICES))))
    return out


def _schedule(cfg: SynthConfig, rng) -> list[list[tuple[SegmentKind, float]]]:
    """Blocks that fit in 90% of the session; durations shrink only if one block does not fit."""
    usable = 0.9 * cfg.session_length
    blocks = []
    total = 0.0
    for _ in range(cfg.n_blocks):
        b = _block_durations(rng)
        dur = sum(d for _, d in b)
        if total + dur > usable:
            break
        blocks.append(b)
        total += dur
    if not blocks:
        b = _block_durations(rng)
        scale = usable / sum(d for _, d in b)
        blocks = [[(k, d * scale) for k, d in b]]
    return blocks


def _layout(cfg: SynthConfig, rng, blocks) -> list[tuple[float, float, list[Segment]]]:
    """Place blocks with random gaps; returns (start, end, segments) per block."""
    total = sum(d for b in blocks for _, d in b)
    slack = cfg.session_length - total
    # At least ~1 s between blocks so consecutive blocks never touch.
    floor = min(1.0, slack / (2 * (len(blocks) + 1)))
    gaps = floor + rng.dirichlet(np.ones(len(blocks) + 1)) * (slack - floor * (len(blocks) + 1))
    out = []
    t = 0.0
    for bi, b in enumerate(blocks):
        t += gaps[bi]
        segs = []
        start = _ms(t)
        cur = start
        for kind, d in b:
            t += d
            end = _ms(t)
            if end <= cur:
                continue
            segs.append(Segment(cur, end, kind, bi))
            cur = end
        out.append((start, cur, segs))
    return out


def _attention(cfg: SynthConfig, rng, start: float, end: float) -> list[tuple[float, float, Attention]]:
    out = []
    t = start
    att = Attention.DEVICE
    while t < end:
        med, sigma = cfg.device_dwell if att == Attention.DEVICE else cfg.environment_dwell
        d = float(rng.lognormal(math.log(med), sigma))
        nxt = _ms(min(t + max(d, 0.05), end))
        if nxt <= t:
            nxt = end
        out.append((t, nxt, att))
        t = nxt
        att = Attention.ENVIRONMENT if att == Attention.DEVICE else Attention.DEVICE
    return out


# -- streams ----------------------------------------------------------------------------

def _times(rate: float, length: float) -> np.ndarray:
    return np.round(np.arange(0.0, length, 1.0 / rate), 4)


def _q(x, digits=4):
    return np.round(x, digits)


def _gaze(cfg, rng, length):
    t = _times(GAZE_HZ, length)
    n = t.shape[0]
    # Piecewise-constant gaze targets (fixations) joined by jumps (saccades).
    durs = rng.uniform(0.15, 0.6, size=int(length / 0.15) + 2)
    bounds = np.cumsum(durs)
    seg = np.searchsorted(bounds, t, "right")
    tx = np.clip(rng.normal(0.0, 12.0, size=durs.shape[0] + 1), -60, 60)
    ty = np.clip(rng.normal(-5.0, 8.0, size=durs.shape[0] + 1), -60, 60)
    x = tx[seg] + rng.normal(0.0, cfg.noise.gaze_deg, n)
    y = ty[seg] + rng.normal(0.0, cfg.noise.gaze_deg, n)
    valid = rng.random(n) >= cfg.noise.gaze_invalid_rate
    x = np.where(valid, _q(x), np.nan)
    y = np.where(valid, _q(y), np.nan)
    return GazeStream(t, x, y, valid)


def _imu(cfg, rng, length, phone: bool):
    t = _times(IMU_HZ, length)
    n = t.shape[0]
    gravity = np.array([0.0, 9.81, 0.0]) if phone else np.array([0.0, 0.0, 9.81])
    accel = gravity + rng.normal(0.0, cfg.noise.accel, (n, 3))
    gyro = rng.normal(0.0, cfg.noise.gyro, (n, 3))
    orientation = None
    if phone:
        steps = rng.normal(0.0, cfg.noise.orientation_step, (n, 3))
        orientation = np.cumsum(steps, axis=0) + np.array([0.0, -30.0, 90.0])
        orientation = (orientation + 180.0) % 360.0 - 180.0
    return t, accel, gyro, orientation


def _smooth_grid(rng, g: int, lo: float, hi: float) -> np.ndarray:
    coarse = rng.random((4, 4))
    idx = np.minimum((np.arange(g) * 4) // g, 3)
    grid = coarse[np.ix_(idx, idx)]
    grid = grid * 0.8 + 0.2 * rng.random((g, g))
    return _q(lo + (hi - lo) * grid)


def map_entropy(grid: np.ndarray, bins: int = 32) -> float:
    """Shannon entropy (bits) of a normalised histogram of grid values."""
    hist, _ = np.histogram(np.asarray(grid, dtype=float).ravel(), bins=bins)
    p = hist[hist > 0] / hist.sum()
    return float(-(p * np.log2(p)).sum())


def _map_stats(grid: np.ndarray) -> list[float]:
    return [float(grid.mean()), float(grid.min()), float(grid.max()), float(grid.std()), map_entropy(grid)]


def _frames(cfg, rng, length, consts: Constants, scene_at):
    t = _times(FRAME_HZ, length)
    n = t.shape[0]
    C, S, G = len(consts.classes), len(consts.scenes), consts.map_grid
    face = rng.poisson(cfg.noise.face_rate, n).astype(np.int64)

    # Object presence holds over ~1 s chunks.
    chunk = np.floor(t).astype(np.int64)
    n_chunks = int(chunk.max()) + 1 if n else 0
    p_class = rng.uniform(0.05, 0.6, C)
    present_chunks = rng.random((n_chunks, C)) < p_class
    presence = present_chunks[chunk]
    frac = rng.uniform(0.002, 0.15, (n_chunks, C))[chunk] * (1 + 0.05 * rng.normal(size=(n, C)))
    pixels = np.where(presence, np.clip(frac, 0, 1) * consts.frame_pixel_total, 0).astype(np.int64)
    instances = np.where(presence, 1 + rng.poisson(0.5, (n_chunks, C))[chunk], 0).astype(np.int64)

    scene = np.zeros((n, S), dtype=np.int64)
    scene[np.arange(n), scene_at(t)] = 1

    sal_maps = [_smooth_grid(rng, G, 0.0, 1.0) for _ in range(N_MAPS)]
    obj_maps = [_smooth_grid(rng, G, 0.0, 1.0) for _ in range(N_MAPS)]
    dep_maps = [_smooth_grid(rng, G, 0.5, 20.0) for _ in range(N_MAPS)]
    maps = np.array(sal_maps + obj_maps + dep_maps)
    # Map choice held over ~0.5 s chunks.
    half = np.floor(t * 2).astype(np.int64)
    n_half = int(half.max()) + 1 if n else 0
    sal_ref = rng.integers(0, N_MAPS, n_half)[half]
    obj_ref = N_MAPS + rng.integers(0, N_MAPS, n_half)[half]
    dep_ref = 2 * N_MAPS + rng.integers(0, N_MAPS, n_half)[half]
    stats = np.array([_map_stats(m) for m in maps])
    return dict(t=t, face_count=face, class_presence=presence, class_pixel_counts=pixels,
                class_instance_counts=instances, scene_class=scene,
                saliency=stats[sal_ref], objectness=stats[obj_ref], depth=stats[dep_ref],
                saliency_map=sal_ref.astype(np.int64), objectness_map=obj_ref.astype(np.int64),
                depth_map=dep_ref.astype(np.int64), maps=maps)


def _app_events(rng, length, apps) -> list[PhoneEvent]:
    events = []
    t = float(rng.exponential(20.0))
    while t < length - 1.0:
        app = apps[int(rng.integers(len(apps)))]
        dur = float(rng.uniform(2.0, 40.0))
        stop = min(t + dur, length - 0.5)
        events.append(PhoneEvent(_ms(t), EventKind.APP_START, app))
        events.append(PhoneEvent(_ms(stop), EventKind.APP_STOP, app))
        t = stop + float(rng.exponential(20.0))
    return events


# -- one participant ------------------------------------------------------------------------

def generate_participant(cfg: SynthConfig, index: int, constants: Constants = Constants()):
    """One Recording plus its ground-truth bookkeeping dict."""
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed) & 0xFFFFFFFF, index]))
    pid = participant_id(index)
    L = float(cfg.session_length)
    scene_names = list(constants.scenes)

    blocks = _layout(cfg, rng, _schedule(cfg, rng))
    intervals: list[AnnotationInterval] = []
    segments: list[Segment] = []
    block_env = []
    shifts = []  # (t, direction)
    for b_start, b_end, segs in blocks:
        env = _choice(rng, ENV_WEIGHTS)
        loco = _choice(rng, LOCOMOTION_WEIGHTS)
        block_env.append((b_start, b_end, env))
        segments.extend(segs)
        att = _attention(cfg, rng, b_start, b_end)
        for i, (a, b, at) in enumerate(att):
            intervals.append(AnnotationInterval(a, b, at, env, env != Environment.STREET, loco))
            if i > 0:
                shifts.append((a, "to_environment" if at == Attention.ENVIRONMENT else "to_device"))

    # Scene label follows the block environment; between blocks it is random per gap.
    gap_env = rng.integers(0, len(scene_names), len(blocks) + 1)
    env_index = {e.value: scene_names.index(e.value) for e in Environment if e.value in scene_names}

    def scene_at(t):
        out = np.empty(t.shape[0], dtype=np.int64)
        starts = np.array([b[0] for b in block_env])
        k = np.searchsorted(starts, t, "right") - 1
        for i in range(t.shape[0]):
            j = k[i]
            if j >= 0 and t[i] < block_env[j][1]:
                out[i] = env_index[block_env[j][2].value]
            else:
                out[i] = gap_env[j + 1]
        return out

    gaze = _gaze(cfg, rng, L)
    ht, ha, hg, _ = _imu(cfg, rng, L, phone=False)
    pt, pa, pg, po = _imu(cfg, rng, L, phone=True)
    fr = _frames(cfg, rng, L, constants, scene_at)
    touches = np.sort(rng.uniform(0, L, rng.poisson(cfg.noise.touch_rate * L)))
    events = [PhoneEvent(_ms(x), EventKind.TOUCH) for x in touches]
    events += _app_events(rng, L, list(constants.apps))

    # Planted cues.
    lo, hi = cfg.cue_lead
    cues = []
    screen_on_at = []
    for s, direction in shifts:
        if rng.random() >= cfg.cue_probability:
            continue
        lead = float(rng.uniform(lo, hi))
        c0 = max(0.0, s - lead)
        if direction == "to_device":
            m = (pt >= c0) & (pt < s)
            pa[m] += rng.normal(0.0, cfg.burst_accel, (int(m.sum()), 3))
            pg[m] += rng.normal(0.0, cfg.burst_gyro, (int(m.sum()), 3))
            screen_on_at.append((_ms(c0), s))
        else:
            m = (fr["t"] >= c0) & (fr["t"] < s)
            fr["face_count"][m] += cfg.face_cue_strength
        cues.append({"t": s, "direction": direction, "lead": lead})

    # Screen on at each device cue, off a short timeout after attention next
    # leaves the device (or before the next cue, whichever is first).
    to_env_times = np.array([s for s, d in shifts if d == "to_environment"])
    for i, (on, s) in enumerate(screen_on_at):
        k = np.searchsorted(to_env_times, s, "right")
        off = to_env_times[k] + rng.uniform(*SCREEN_TIMEOUT) if k < to_env_times.shape[0] else s + 30.0
        limit = screen_on_at[i + 1][0] - 0.01 if i + 1 < len(screen_on_at) else L - 0.01
        off = _ms(min(off, limit))
        if off <= on:
            continue
        events.append(PhoneEvent(on, EventKind.SCREEN_ON))
        events.append(PhoneEvent(off, EventKind.SCREEN_OFF))
    order = {EventKind.SCREEN_OFF: 0, EventKind.APP_STOP: 1, EventKind.SCREEN_ON: 2,
             EventKind.APP_START: 3, EventKind.TOUCH: 4}
    events.sort(key=lambda e: (e.t, order[e.kind], e.app_id or ""))

    rec = Recording(
        participant_id=pid,
        gaze=gaze,
        head_imu=ImuStream(ht, _q(ha), _q(hg)),
        phone_imu=ImuStream(pt, _q(pa), _q(pg), _q(po)),
        phone_events=tuple(events),
        frames=FrameStream(**fr),
        annotations=AnnotationTrack(tuple(intervals)),
        segments=SegmentSchedule(tuple(segments)),
        constants=constants,
    )
    truth = _bookkeeping(pid, intervals, segments, shifts, cues)
    return rec, truth


def _bookkeeping(pid, intervals, segments, shifts, cues) -> dict:
    on = sum(b.end - b.start for b in intervals if b.attention == Attention.DEVICE)
    off = sum(b.end - b.start for b in intervals if b.attention == Attention.ENVIRONMENT)
    envs = {e.value: 0.0 for e in Environment}
    loco = {m.value: 0.0 for m in Locomotion}
    indoor = {"indoor": 0.0, "outdoor": 0.0}
    for iv in intervals:
        d = iv.end - iv.start
        envs[iv.environment.value] += d
        loco[iv.locomotion.value] += d
        indoor["indoor" if iv.indoor else "outdoor"] += d
    return {
        "participant_id": pid,
        "shifts": {"to_environment": sum(d == "to_environment" for _, d in shifts),
                   "to_device": sum(d == "to_device" for _, d in shifts)},
        "attention_time": {"on_device": on, "off_device": off},
        "environments": envs,
        "indoor_outdoor": indoor,
        "locomotion": loco,
        "segments": {"working": sum(s.end - s.start for s in segments if s.kind == SegmentKind.WORKING),
                     "waiting": sum(s.end - s.start for s in segments if s.kind == SegmentKind.WAITING),
                     "n_working": sum(s.kind == SegmentKind.WORKING for s in segments),
                     "n_waiting": sum(s.kind == SegmentKind.WAITING for s in segments)},
        "shift_times": [[t, d] for t, d in shifts],
        "cues": cues,
    }


def generate_with_truth(cfg: SynthConfig, constants: Constants = Constants()):
    cfg.check()
    pairs = [generate_participant(cfg, i, constants) for i in range(cfg.n_participants)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def generate(cfg: SynthConfig, constants: Constants = Constants()) -> list[Recording]:
    """Recordings for ``cfg.n_participants`` participants (ids P01, P02, ...)."""
    return generate_with_truth(cfg, constants)[0]


def write_corpus(cfg: SynthConfig, out_dir: str | Path, constants: Constants = Constants(),
                 provenance: dict | None = None) -> list[Path]:
    """Generate and save a corpus: one sub-directory per participant plus ``ground_truth.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recs, truth = generate_with_truth(cfg, constants)
    paths = [save_recording(r, out / r.participant_id) for r in recs]
    doc = {"synth_config": cfg.to_json(), "participants": truth}
    if provenance is not None:
        doc["run_config"] = provenance
    (out / "ground_truth.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
