"""Scoring and the leave-one-person-out experiment driver."""

from __future__ import annotations

import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import forest as rf
from .errors import LengthMismatch, SingleClass, TooFewParticipants
from .examples import Example, TaskConfig, balance, generate
from .features import FeatureExtractor, FeatureGroup
from .recording import Environment, Recording, SegmentKind


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @classmethod
    def from_predictions(cls, preds, labels) -> "ConfusionMatrix":
        p = np.asarray(preds, dtype=bool)
        t = np.asarray(labels, dtype=bool)
        return cls(int(np.sum(p & t)), int(np.sum(p & ~t)), int(np.sum(~p & t)), int(np.sum(~p & ~t)))

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> "ConfusionMatrix":
        """The same matrix with the negative class treated as positive."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)

    def normalized(self) -> list[list[float]]:
        """Rows = true class (negative, positive), columns = predicted class."""
        rows = [(self.tn, self.fp), (self.fn, self.tp)]
        out = []
        for a, b in rows:
            n = a + b
            out.append([a / n, b / n] if n else [0.0, 0.0])
        return out

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def f1(cm: ConfusionMatrix) -> float:
    """2PR/(P+R) with P = TP/(TP+FP), R = TP/(TP+FN); 0 when undefined."""
    if cm.tp == 0:
        return 0.0
    precision = cm.tp / (cm.tp + cm.fp)
    recall = cm.tp / (cm.tp + cm.fn)
    return 2.0 * precision * recall / (precision + recall)


def weighted_f1(preds: Sequence[bool], labels: Sequence[bool]) -> float:
    """Support-weighted mean of the per-class F1 scores of both classes."""
    if len(preds) != len(labels):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(labels)} labels")
    if len(labels) == 0:
        raise LengthMismatch("need at least one prediction")
    cm = ConfusionMatrix.from_predictions(preds, labels)
    n_pos = cm.tp + cm.fn
    n_neg = cm.tn + cm.fp
    return (n_pos * f1(cm) + n_neg * f1(cm.swapped())) / (n_pos + n_neg)


# -- experiment -----------------------------------------------------------------

def fold_seed(seed: int, participant_id: str) -> int:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(participant_id.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


@dataclass
class FoldResult:
    participant: str
    hyperparams: dict | None = None
    confusion: ConfusionMatrix | None = None
    weighted_f1: float | None = None
    n_train: int = 0
    n_test: int = 0
    skipped: str | None = None
    # Per-example detail kept for breakdowns; not serialized.
    _preds: list = field(default_factory=list, repr=False)
    _labels: list = field(default_factory=list, repr=False)
    _kinds: list = field(default_factory=list, repr=False)
    _envs: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        d = {"participant": self.participant, "n_train": self.n_train, "n_test": self.n_test}
        if self.skipped is not None:
            d["skipped"] = self.skipped
        else:
            d["hyperparams"] = self.hyperparams
            d["confusion"] = self.confusion.to_json()
            d["confusion_normalized"] = self.confusion.normalized()
            d["weighted_f1"] = self.weighted_f1
        return d


def _score_block(preds, labels) -> dict:
    cm = ConfusionMatrix.from_predictions(preds, labels)
    return {"n": len(labels), "confusion": cm.to_json(), "confusion_normalized": cm.normalized(),
            "weighted_f1": weighted_f1(preds, labels) if labels else None}


@dataclass
class ExperimentReport:
    task: str
    group: str
    target_window: float
    folds: list[FoldResult]
    mean_f1: float | None
    std_f1: float | None
    breakdowns: dict
    config: dict = field(default_factory=dict)

    @property
    def scored_folds(self) -> list[FoldResult]:
        return [f for f in self.folds if f.skipped is None]

    def to_json(self) -> dict:
        return {
            "task": self.task, "group": self.group, "target_window": self.target_window,
            "mean_weighted_f1": self.mean_f1, "std_weighted_f1": self.std_f1,
            "n_folds": len(self.folds), "n_scored_folds": len(self.scored_folds),
            "skipped_folds": [f.participant for f in self.folds if f.skipped is not None],
            "folds": [f.to_json() for f in self.folds],
            "breakdowns": self.breakdowns,
            "config": self.config,
        }

    def to_text(self) -> str:
        return format_table([self])

    def confusion_csv(self) -> str:
        lines = ["scope,key,true_class,pred_negative,pred_positive"]
        for f in self.scored_folds:
            for cls, row in zip(("negative", "positive"), f.confusion.normalized()):
                lines.append(f"fold,{f.participant},{cls},{row[0]:.6f},{row[1]:.6f}")
        for scope in ("overall", "segment_kind", "environment"):
            items = self.breakdowns.get(scope, {})
            if scope == "overall":
                items = {"all": items}
            for key, blk in items.items():
                for cls, row in zip(("negative", "positive"), blk["confusion_normalized"]):
                    lines.append(f"{scope},{key},{cls},{row[0]:.6f},{row[1]:.6f}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.3f}"


def format_table(reports: Sequence[ExperimentReport]) -> str:
    """Aligned plain-text summary, one row per report."""
    header = ["task", "group", "target_s", "folds", "mean_f1", "std_f1", "working_f1", "waiting_f1"]
    rows = []
    for r in reports:
        sk = r.breakdowns.get("segment_kind", {})
        rows.append([r.task, r.group, f"{r.target_window:g}", f"{len(r.scored_folds)}/{len(r.folds)}",
                     _fmt(r.mean_f1), _fmt(r.std_f1),
                     _fmt(sk.get("working", {}).get("weighted_f1")),
                     _fmt(sk.get("waiting", {}).get("weighted_f1"))])
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def _run_fold(train: list[Example], test: list[Example], participant: str, grid, seed: int,
              cv_folds: int, n_features: int) -> FoldResult:
    res = FoldResult(participant)
    s = fold_seed(seed, participant)
    try:
        train_b = balance(train, s)
        test_b = balance(test, s + 1)
    except SingleClass as exc:
        res.skipped = str(exc)
        return res
    g = grid if grid is not None else rf.default_grid(n_features)
    hp = rf.tune(train_b, g, cv_folds, s)
    model = rf.train(train_b, hp, s)
    X = np.stack([e.features.values for e in test_b])
    preds = rf.predict_labels(model, X).tolist()
    labels = [e.label for e in test_b]
    res.hyperparams = hp.to_json()
    res.confusion = ConfusionMatrix.from_predictions(preds, labels)
    res.weighted_f1 = weighted_f1(preds, labels)
    res.n_train = len(train_b)
    res.n_test = len(test_b)
    res._preds = preds
    res._labels = labels
    res._kinds = [SegmentKind(e.segment_kind).value for e in test_b]
    res._envs = [e.environment for e in test_b]
    return res


def run_experiment(recordings: Sequence[Recording], cfg: TaskConfig, group: FeatureGroup,
                   grid: Sequence[rf.Hyperparams] | None = None, seed: int = 0, cv_folds: int = 3,
                   workers: int = 1, extractors: dict | None = None,
                   config: dict | None = None) -> ExperimentReport:
    """Leave-one-person-out evaluation of one task and feature group.

    Per fold: balance train, tune on train, fit, balance test, predict,
    score. Folds whose training or test data lack a class are reported as
    skipped and left out of the mean. ``extractors`` maps participant id to
    a reusable FeatureExtractor.
    """
    group = FeatureGroup(group)
    if extractors is None:
        extractors = {}
    examples: list[Example] = []
    for rec in sorted(recordings, key=lambda r: r.participant_id):
        fx = extractors.get(rec.participant_id)
        if fx is None:
            fx = extractors[rec.participant_id] = FeatureExtractor(rec)
        examples.extend(generate(rec, cfg, group, fx))
    pids = sorted({r.participant_id for r in recordings})
    if len(pids) < 2:
        raise TooFewParticipants(f"leave-one-person-out needs >= 2 participants, got {len(pids)}")
    n_features = len(examples[0].features) if examples else 0
    by_pid = {p: [] for p in pids}
    for e in examples:
        by_pid[e.participant_id].append(e)
    jobs = []
    empty = []
    for p in pids:
        test = by_pid[p]
        train = [e for q in pids if q != p for e in by_pid[q]]
        if not test or not train:
            empty.append(FoldResult(p, skipped="no eligible examples" if not test else "no training examples"))
        else:
            jobs.append((train, test, p))

    def work(job):
        return _run_fold(job[0], job[1], job[2], grid, seed, cv_folds, n_features)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    results.extend(empty)
    results.sort(key=lambda r: r.participant)

    scored = [r for r in results if r.skipped is None]
    f1s = [r.weighted_f1 for r in scored]
    mean = float(np.mean(f1s)) if f1s else None
    std = float(np.std(f1s)) if f1s else None

    preds = [p for r in scored for p in r._preds]
    labels = [t for r in scored for t in r._labels]
    kinds = [k for r in scored for k in r._kinds]
    envs = [e for r in scored for e in r._envs]
    breakdowns = {"overall": _score_block(preds, labels), "segment_kind": {}, "environment": {}}
    for kind in (k.value for k in SegmentKind):
        sel = [i for i, k in enumerate(kinds) if k == kind]
        breakdowns["segment_kind"][kind] = _score_block([preds[i] for i in sel], [labels[i] for i in sel])
    for env in (e.value for e in Environment):
        sel = [i for i, e in enumerate(envs) if e == env]
        breakdowns["environment"][env] = _score_block([preds[i] for i in sel], [labels[i] for i in sel])

    resolved = {"task": cfg.to_json(), "group": group.value, "seed": seed, "cv_folds": cv_folds,
                "grid": None if grid is None else [h.to_json() for h in grid]}
    if config:
        resolved = {**config, **resolved}
    return ExperimentReport(task=cfg.task.value, group=group.value, target_window=float(cfg.target_window),
                            folds=results, mean_f1=mean, std_f1=std, breakdowns=breakdowns,
                            config=resolved)


def dumps_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
