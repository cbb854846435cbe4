import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attnforecast.errors import LengthMismatch, TooFewParticipants
from attnforecast.evaluation import (
    ConfusionMatrix, dumps_report, f1, fold_seed, format_table, run_experiment, weighted_f1,
)
from attnforecast.examples import Task, TaskConfig
from attnforecast.features import FeatureGroup
from attnforecast.forest import Hyperparams

from conftest import D, make_recording
from oracles import f1_by_hand

GRID = [Hyperparams(5, 4, 1, 3)]


def test_f1_examples():
    assert f1(ConfusionMatrix(tp=1)) == 1.0
    assert f1(ConfusionMatrix(tp=0, fp=3, fn=2)) == 0.0
    assert f1(ConfusionMatrix()) == 0.0
    assert abs(f1(ConfusionMatrix(tp=3, fp=1, fn=2)) - 2 / 3) < 1e-12


def test_weighted_f1_examples():
    assert weighted_f1([True, False, True], [True, False, True]) == 1.0
    # balanced labels, constant predictor: half of the majority-class F1
    assert abs(weighted_f1([True] * 4, [True, True, False, False]) - 0.5 * (2 / 3)) < 1e-12
    # supports 240/60 (80/20) with per-class F1 0.75 / 0.5
    cm = ConfusionMatrix(tp=150, fp=10, fn=90, tn=50)
    assert abs(f1(cm) - 0.75) < 1e-12 and abs(f1(cm.swapped()) - 0.5) < 1e-12
    preds = [True] * 150 + [True] * 10 + [False] * 90 + [False] * 50
    labels = [True] * 150 + [False] * 10 + [True] * 90 + [False] * 50
    assert abs(weighted_f1(preds, labels) - 0.70) < 1e-12


def test_weighted_f1_length_checks():
    with pytest.raises(LengthMismatch):
        weighted_f1([True], [True, False])
    with pytest.raises(LengthMismatch):
        weighted_f1([], [])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(1, 9))
def test_f1_scale_invariant_and_matches_formula(tp, fp, fn, k):
    cm = ConfusionMatrix(tp, fp, fn)
    assert f1(cm) == pytest.approx(f1_by_hand(tp, fp, fn), abs=1e-12)
    assert f1(ConfusionMatrix(k * tp, k * fp, k * fn)) == pytest.approx(f1(cm), abs=1e-12)
    assert 0.0 <= f1(cm) <= 1.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=80))
def test_weighted_f1_class_symmetry(pairs):
    p = [a for a, _ in pairs]
    t = [b for _, b in pairs]
    assert weighted_f1(p, t) == pytest.approx(weighted_f1([not a for a in p], [not b for b in t]), abs=1e-12)
    assert 0.0 <= weighted_f1(p, t) <= 1.0


def test_confusion_normalized_rows():
    cm = ConfusionMatrix(tp=3, fp=1, fn=1, tn=5)
    assert cm.normalized() == [[5 / 6, 1 / 6], [1 / 4, 3 / 4]]
    assert ConfusionMatrix().normalized() == [[0.0, 0.0], [0.0, 0.0]]
    assert cm.total == 10


def test_fold_seed_stable():
    assert fold_seed(0, "P01") == fold_seed(0, "P01")
    assert fold_seed(0, "P01") != fold_seed(0, "P02")
    assert fold_seed(0, "P01") != fold_seed(1, "P01")


@pytest.fixture(scope="module")
def two_participant_report(small_corpus):
    return run_experiment(small_corpus[:2], TaskConfig(Task.PRIMARY_FOCUS), FeatureGroup.PHONE, GRID, seed=3)


def test_report_structure(two_participant_report):
    r = two_participant_report
    assert [f.participant for f in r.folds] == ["P01", "P02"]
    scored = [f.weighted_f1 for f in r.scored_folds]
    assert len(scored) == 2
    assert abs(r.mean_f1 - sum(scored) / len(scored)) < 1e-12
    assert abs(r.std_f1 - float(np.std(scored))) < 1e-12
    for f in r.scored_folds:
        c = f.confusion
        assert c.total == f.n_test
        assert c.tp + c.fn == c.tn + c.fp  # test folds are balanced
    doc = r.to_json()
    assert set(doc["breakdowns"]["segment_kind"]) == {"working", "waiting"}
    assert len(doc["breakdowns"]["environment"]) == 6
    assert doc["breakdowns"]["overall"]["n"] == sum(f.n_test for f in r.scored_folds)
    total = sum(b["n"] for b in doc["breakdowns"]["segment_kind"].values())
    assert total == doc["breakdowns"]["overall"]["n"]
    assert doc["config"]["seed"] == 3 and doc["config"]["grid"] == [GRID[0].to_json()]
    json.loads(dumps_report(doc))
    assert "primary_focus" in format_table([r])
    assert r.confusion_csv().startswith("scope,key,true_class,")


def test_report_deterministic_and_schedule_free(small_corpus, two_participant_report):
    again = run_experiment(small_corpus[:2], TaskConfig(Task.PRIMARY_FOCUS), FeatureGroup.PHONE, GRID,
                           seed=3, workers=2)
    assert dumps_report(again.to_json()) == dumps_report(two_participant_report.to_json())
    assert again.confusion_csv() == two_participant_report.confusion_csv()


def test_fold_without_examples_skipped(small_corpus):
    # a participant who never looks away has no ShiftToDevice examples
    idle = make_recording([(0, 300, D)], pid="P09")
    r = run_experiment([small_corpus[0], small_corpus[1], idle], TaskConfig(Task.SHIFT_TO_DEVICE),
                       FeatureGroup.PHONE, GRID, seed=0)
    assert [f.participant for f in r.folds] == ["P01", "P02", "P09"]
    assert r.folds[2].skipped is not None
    assert r.to_json()["skipped_folds"] == ["P09"]
    scored = [f.weighted_f1 for f in r.scored_folds]
    assert abs(r.mean_f1 - np.mean(scored)) < 1e-12


def test_too_few_participants(one_recording):
    with pytest.raises(TooFewParticipants):
        run_experiment([one_recording], TaskConfig(Task.PRIMARY_FOCUS), FeatureGroup.PHONE, GRID)
