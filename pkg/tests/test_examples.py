from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attnforecast.errors import OutOfRange, SingleClass, TooFewParticipants
from attnforecast.examples import (
    Example, Task, TaskConfig, balance, candidate_refs, generate, label_refs, lopo_folds, to_arrays,
)
from attnforecast.features import FeatureGroup, FeatureVector
from attnforecast.recording import Attention, SegmentKind
from attnforecast.synth import oracle_label
from attnforecast.timeline import attention_at, spans

from conftest import D, E, make_recording

ENV, DEV, FOC = Task.SHIFT_TO_ENVIRONMENT, Task.SHIFT_TO_DEVICE, Task.PRIMARY_FOCUS


def _labels(rec, task, tw=None, refs=None):
    cfg = TaskConfig(task, tw)
    if refs is None:
        refs = [t for t, _ in candidate_refs(rec, cfg)]
    return {t: lab for t, lab, _ in label_refs(rec, cfg, refs)}


def test_shift_to_environment_positive():
    rec = make_recording([(0, 3.4, D), (3.4, 10, E)])
    assert _labels(rec, ENV, 1.0, [3.0]) == {3.0: True}
    assert _labels(rec, ENV, 1.0, [2.0]) == {2.0: False}


def test_not_eligible_when_attention_elsewhere():
    rec = make_recording([(0, 3.4, D), (3.4, 10, E)])
    assert _labels(rec, ENV, 1.0, [5.0]) == {}
    assert _labels(rec, DEV, 1.0, [5.0]) == {5.0: False}


def test_shift_instant_uses_interval_starting_there():
    rec = make_recording([(0, 4, D), (4, 10, E)])
    assert _labels(rec, ENV, 1.0, [4.0]) == {}
    assert _labels(rec, DEV, 1.0, [4.0]) == {4.0: False}
    # the event at t_ref itself is outside (t_ref, t_ref + w]
    assert _labels(rec, ENV, 1.0, [3.0]) == {3.0: True}


def test_primary_focus_tie_is_negative():
    rec = make_recording([(0, 7.5, D), (7.5, 20, E)])
    assert _labels(rec, FOC, 5.0, [5.0]) == {5.0: False}  # 2.5 s of 5 s on device
    assert _labels(rec, FOC, 5.0, [5.5]) == {5.5: False}
    assert _labels(rec, FOC, 5.0, [4.5]) == {4.5: True}


def test_primary_focus_always_emitted():
    rec = make_recording([(0, 5, D), (5, 20, E)])
    assert set(_labels(rec, FOC, 5.0)) == set(t for t, _ in candidate_refs(rec, TaskConfig(FOC)))


def test_candidates_respect_spans_and_segments():
    rec = make_recording([(0, 10, D), (10, 20, E), (25, 40, D)],
                         segments=[(0, 15, SegmentKind.WORKING, 0), (15, 40, SegmentKind.WAITING, 1)])
    cfg = TaskConfig(FOC, 5.0)
    refs = candidate_refs(rec, cfg)
    for t, seg in refs:
        assert any(a <= t - 1.0 and t + 5.0 <= b for a, b in [(0, 15), (25, 40)])
        assert seg.start <= t - 1.0 and t + 5.0 <= seg.end
    ts = [t for t, _ in refs]
    # 15..20 is only 5 s long, too short for a 1 s + 5 s window
    assert ts == [1.0 + 0.5 * k for k in range(19)] + [26.0 + 0.5 * k for k in range(19)]


def test_task_config_defaults_and_checks():
    assert TaskConfig(ENV).target_window == 1.0
    assert TaskConfig(DEV).target_window == 10.0
    assert TaskConfig(FOC).target_window == 5.0
    with pytest.raises(ValueError):
        TaskConfig(ENV, 2.0)
    with pytest.raises(ValueError):
        TaskConfig(ENV, stride=0)


# -- oracle agreement --------------------------------------------------------------------------

def test_oracle_examples():
    rec = make_recording([(0, 10, D)])
    assert oracle_label(rec, ENV, 3.0, 1.0) == {"eligible": True, "label": False}
    rec = make_recording([(0, 2, D), (2, 10, E)])
    assert oracle_label(rec, FOC, 3.0, 5.0) == {"eligible": True, "label": False}
    with pytest.raises(OutOfRange):
        oracle_label(rec, FOC, 8.0, 5.0)


@pytest.mark.parametrize("task", list(Task))
@pytest.mark.parametrize("tw", [1.0, 5.0, 10.0])
def test_generate_agrees_with_oracle(small_corpus, task, tw):
    cfg = TaskConfig(task, tw)
    n = 0
    for rec in small_corpus:
        refs = [t for t, _ in candidate_refs(rec, cfg)]
        got = _labels(rec, task, tw, refs)
        for t in refs:
            o = oracle_label(rec, task, t, tw)
            assert o["eligible"] == (t in got), t
            if o["eligible"]:
                assert o["label"] == got[t], t
                n += 1
    assert n > 100


@st.composite
def timelines(draw):
    t, ivs = 0.0, []
    att = draw(st.sampled_from([D, E]))
    for _ in range(draw(st.integers(1, 12))):
        if ivs and draw(st.integers(0, 5)) == 0:
            t += draw(st.sampled_from([0.5, 1.5, 3.0]))
            att = draw(st.sampled_from([D, E]))
        dur = draw(st.sampled_from([0.3, 0.5, 1.0, 2.5, 4.0, 7.0]))
        ivs.append((t, t + dur, att))
        t += dur
        att = E if att == D else D
    return make_recording(ivs)


@settings(max_examples=150, deadline=None)
@given(timelines(), st.sampled_from(list(Task)), st.sampled_from([1.0, 5.0, 10.0]))
def test_random_timelines_agree_with_oracle(rec, task, tw):
    cfg = TaskConfig(task, tw)
    refs = [t for t, _ in candidate_refs(rec, cfg)]
    got = _labels(rec, task, tw, refs)
    for t in refs:
        o = oracle_label(rec, task, t, tw)
        assert o["eligible"] == (t in got)
        if o["eligible"]:
            assert o["label"] == got[t]


def test_generated_examples_properties(one_recording):
    sp = spans(one_recording.annotations)
    for task in Task:
        cfg = TaskConfig(task)
        exs = generate(one_recording, cfg, FeatureGroup.PHONE)
        assert exs
        for e in exs:
            a, b = e.t_ref - cfg.feature_window, e.t_ref + cfg.target_window
            assert any(lo <= a and b <= hi for lo, hi in sp)
            assert any(s.start <= a and b <= s.end and s.kind == e.segment_kind for s in one_recording.segments)
            state = attention_at(one_recording.annotations, e.t_ref)
            if task == ENV:
                assert state == Attention.DEVICE
            elif task == DEV:
                assert state == Attention.ENVIRONMENT
            assert e.features.names == exs[0].features.names
            assert e.task == task


# -- balancing and folds -----------------------------------------------------------------------

def _fake(pid, label, i=0):
    return Example(pid, float(i), FeatureVector(("f",), np.array([float(i)])), label,
                   SegmentKind.WORKING, "office", ENV)


def test_balance_unchanged_when_equal():
    exs = [_fake("P01", i % 2 == 0, i) for i in range(20)]
    assert balance(exs, 3) == exs


def test_balance_undersamples_majority():
    exs = [_fake("P01", True, i) for i in range(100)] + [_fake("P01", False, 100 + i) for i in range(10)]
    out = balance(exs, 3)
    assert Counter(e.label for e in out) == {True: 10, False: 10}
    assert all(e in exs for e in out)
    assert [e.t_ref for e in out] == sorted(e.t_ref for e in out)  # input order kept
    assert balance(exs, 3) == out
    assert balance(exs, 4) != out


def test_balance_single_class():
    with pytest.raises(SingleClass):
        balance([_fake("P01", True, i) for i in range(5)], 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), min_size=2, max_size=60), st.integers(0, 2 ** 32 - 1))
def test_balance_properties(labels, seed):
    exs = [_fake("P01", lab, i) for i, lab in enumerate(labels)]
    if all(labels) or not any(labels):
        with pytest.raises(SingleClass):
            balance(exs, seed)
        return
    out = balance(exs, seed)
    c = Counter(e.label for e in out)
    assert c[True] == c[False] == min(sum(labels), len(labels) - sum(labels))
    assert len({id(e) for e in out}) == len(out)


def test_lopo_twenty_participants():
    exs = [_fake(f"P{p:02d}", i % 2 == 0, i) for p in range(20, 0, -1) for i in range(3)]
    folds = lopo_folds(exs)
    assert len(folds) == 20
    assert [te[0].participant_id for _, te in folds] == [f"P{p:02d}" for p in range(1, 21)]
    for tr, te in folds:
        pid = te[0].participant_id
        assert all(e.participant_id == pid for e in te)
        assert all(e.participant_id != pid for e in tr)
        assert len(tr) + len(te) == len(exs)
        assert {id(e) for e in tr} | {id(e) for e in te} == {id(e) for e in exs}


def test_lopo_one_participant():
    with pytest.raises(TooFewParticipants):
        lopo_folds([_fake("P01", True), _fake("P01", False, 1)])


def test_to_arrays():
    X, y = to_arrays([_fake("P01", True, 2), _fake("P01", False, 5)])
    assert X.tolist() == [[2.0], [5.0]] and y.tolist() == [1, 0]
