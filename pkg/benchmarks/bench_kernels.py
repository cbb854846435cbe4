"""Numba vs pure-numpy kernel timings on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json OUT]

Each kernel runs once untimed (numba compilation), then ``--repeat`` times.
Outputs of the two backends are compared; integer and tree outputs must
match exactly, float statistics differ only by summation order. A final
end-to-end row times one LOPO experiment in a subprocess per backend,
selected with ATTNFORECAST_DISABLE_NUMBA.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from attnforecast import _kernels_numpy as npk

try:
    from attnforecast import _kernels_numba as nbk
except ImportError:  # pragma: no cover
    nbk = None


def _inputs(seed=0):
    rng = np.random.default_rng(seed)
    # 30 min of 100 Hz IMU, 1 s windows every 0.5 s
    t = np.arange(0, 1800, 0.01)
    vals = rng.normal(size=(t.shape[0], 10))
    ends = np.arange(1.0, 1800.0, 0.5)
    lo = np.searchsorted(t, ends - 1.0).astype(np.int64)
    hi = np.searchsorted(t, ends).astype(np.int64)
    # 10 min of 30 Hz gaze with dwell clusters and 2% invalid samples
    tg = np.round(np.arange(0, 600, 1 / 30), 4)
    centre = np.repeat(rng.normal(scale=10, size=tg.shape[0] // 9 + 1), 9)[:tg.shape[0]]
    gx = centre + rng.normal(scale=0.15, size=tg.shape[0])
    gy = centre[::-1] + rng.normal(scale=0.15, size=tg.shape[0])
    valid = rng.random(tg.shape[0]) > 0.02
    gx[~valid] = 0.0
    gy[~valid] = 0.0
    # forest training set: 4000 x 60 with ties
    X = np.round(rng.normal(size=(4000, 60)), 2)
    y = ((X[:, 0] + X[:, 1] + rng.normal(size=4000)) > 0).astype(np.int64)
    return dict(imu=(t, vals, lo, hi, ends - 1.0), gaze=(tg, gx, gy, valid), forest=(X, y))


def _forest(k, X, y, n_trees=20):
    prep = k.prepare_matrix(np.ascontiguousarray(X.T))
    trees = []
    for i in range(n_trees):
        boot = np.sort(np.random.default_rng(i).integers(0, len(y), len(y))).astype(np.int64)
        trees.append(k.grow_tree(prep, y, boot, np.uint64(1000 + i), 8, 5, 8))
    return trees


def _pack(trees):
    offs = np.cumsum([0] + [t[0].shape[0] for t in trees])
    cat = lambda j: np.concatenate([t[j] for t in trees])  # noqa: E731
    left = np.concatenate([np.where(t[2] >= 0, t[2] + o, -1) for t, o in zip(trees, offs)])
    right = np.concatenate([np.where(t[3] >= 0, t[3] + o, -1) for t, o in zip(trees, offs)])
    counts = cat(4)
    vote = (counts[:, 1] > counts[:, 0]).astype(np.int64)
    return cat(0), cat(1), left, right, vote, offs[:-1].astype(np.int64)


def _max_diff(a, b) -> float:
    """Largest absolute difference between two (nested) kernel outputs."""
    if isinstance(a, (tuple, list)):
        return max((_max_diff(u, v) for u, v in zip(a, b)), default=0.0)
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def _time(fn, repeat):
    fn()  # warm-up / compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(repeat: int) -> list[dict]:
    data = _inputs()
    X, y = data["forest"]
    trees_np = _forest(npk, X, y)
    packed = _pack(trees_np)
    cases = {
        "window_stats (3599 windows x 10 ch)": lambda k: k.window_stats(*data["imu"]),
        "idt_fixations (18000 samples)": lambda k: k.idt_fixations(*data["gaze"], 1.0, 0.15, 0.05),
        "grow_tree x20 (4000 x 60)": lambda k: _forest(k, X, y),
        "predict_votes (4000 rows, 20 trees)": lambda k: k.predict_votes(np.ascontiguousarray(X), *packed),
    }
    rows = []
    for name, fn in cases.items():
        t_np, out_np = _time(lambda: fn(npk), repeat)
        row = {"kernel": name, "numpy_s": t_np}
        if nbk is not None:
            t_nb, out_nb = _time(lambda: fn(nbk), repeat)
            row.update(numba_s=t_nb, speedup=t_np / t_nb, max_abs_diff=_max_diff(out_np, out_nb))
        rows.append(row)
    return rows


_E2E = """
import time
from attnforecast import BACKEND
from attnforecast.synth import SynthConfig, generate
from attnforecast.examples import Task, TaskConfig
from attnforecast.features import FeatureGroup
from attnforecast.forest import Hyperparams
from attnforecast.evaluation import run_experiment
recs = generate(SynthConfig(n_participants=4, session_length=900.0, seed=1, cue_probability=0.5))
t0 = time.perf_counter()
rep = run_experiment(recs, TaskConfig(Task.PRIMARY_FOCUS), FeatureGroup.PROPOSED,
                     [Hyperparams(20, 8, 5, 21)], seed=0)
print(BACKEND, time.perf_counter() - t0, rep.mean_f1)
"""


def end_to_end() -> dict:
    out = {}
    for flag in ("1", "0"):
        env = {**os.environ, "ATTNFORECAST_DISABLE_NUMBA": flag}
        subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, check=True)  # warm cache
        res = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, text=True, check=True)
        backend, secs, f1 = res.stdout.split()
        out[backend] = {"seconds": float(secs), "mean_f1": float(f1)}
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write results to this file")
    ap.add_argument("--skip-e2e", action="store_true", help="kernels only")
    args = ap.parse_args(argv)
    rows = bench(args.repeat)
    print(f"{'kernel':40s} {'numpy s':>9s} {'numba s':>9s} {'speedup':>8s}  max |diff|")
    for r in rows:
        nb = f"{r['numba_s']:9.4f} {r['speedup']:8.1f}  {r['max_abs_diff']:.1e}" if "numba_s" in r else "      n/a"
        print(f"{r['kernel']:40s} {r['numpy_s']:9.4f} {nb}")
    doc = {"kernels": rows}
    if not args.skip_e2e:
        e2e = end_to_end()
        doc["end_to_end"] = e2e
        print("\nLOPO experiment (4 participants x 15 min, PrimaryFocus, Proposed):")
        for b, v in e2e.items():
            print(f"  {b:6s} {v['seconds']:7.2f} s   mean F1 {v['mean_f1']:.4f}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
