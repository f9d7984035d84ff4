import datetime as dt
import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import as_slots, run_schedule
from oracles import absence_alarms, random_schedule
from smartsocket import model
from smartsocket.engine import EngineParams, PatternEngine
from smartsocket.errors import ConfigError, DuplicateClose, OutOfOrderEvent, UnknownSocket
from smartsocket.model import SwitchOnEvent

DAY1 = dt.date(2015, 2, 10)


def at(day_offset, clock):
    return dt.datetime.combine(DAY1 + dt.timedelta(days=day_offset), dt.time.fromisoformat(clock))


def ev(day_offset, clock, socket="S001"):
    return SwitchOnEvent(socket, at(day_offset, clock))


def close(engine, day_offset, index=10, socket="S001"):
    day = DAY1 + dt.timedelta(days=day_offset)
    return engine.close_bin(socket, index, day, engine.params.close_due(day, index))


def test_three_days_form_a_pattern():
    eng = PatternEngine()
    for d in range(3):
        state = eng.ingest_event(ev(d, "10:30:00"))
        close(eng, d)
    assert state.consecutive_hits == 3 and state.active
    assert state.last_hit_date == DAY1 + dt.timedelta(days=2)


def test_gap_resets_streak():
    eng = PatternEngine()
    for d in (0, 1):
        eng.ingest_event(ev(d, "10:30:00"))
    state = eng.ingest_event(ev(3, "10:30:00"))
    assert state.consecutive_hits == 1 and not state.active


def test_two_events_same_bin_count_once():
    eng = PatternEngine()
    eng.ingest_event(ev(0, "10:05:00"))
    state = eng.ingest_event(ev(0, "10:50:00"))
    assert state.consecutive_hits == 1


def test_absence_alarm_and_reset():
    eng = PatternEngine()
    for d in range(3):
        eng.ingest_event(ev(d, "10:30:00"))
        assert close(eng, d) is None
    alarm = close(eng, 3)
    assert alarm is not None
    assert (alarm.socket, alarm.bin, alarm.date) == ("S001", 10, DAY1 + dt.timedelta(days=3))
    assert alarm.raised_at == at(3, "11:15:00")
    assert alarm.dedupe_key == "S001/2015-02-13/10"
    assert eng.snapshot("S001") == []


def test_presence_suppresses_alarm():
    eng = PatternEngine()
    for d in range(3):
        eng.ingest_event(ev(d, "10:30:00"))
        close(eng, d)
    state = eng.ingest_event(ev(3, "10:20:00"))
    assert close(eng, 3) is None
    assert state.consecutive_hits == 4


def test_unformed_pattern_no_alarm():
    eng = PatternEngine()
    for d in range(2):
        eng.ingest_event(ev(d, "10:30:00"))
        close(eng, d)
    assert close(eng, 2) is None
    assert eng.snapshot("S001")[0].consecutive_hits == 2


def test_duplicate_close():
    eng = PatternEngine()
    eng.ingest_event(ev(0, "10:30:00"))
    close(eng, 0)
    with pytest.raises(DuplicateClose):
        close(eng, 0)


def test_close_before_grace_rejected():
    eng = PatternEngine()
    with pytest.raises(ValueError):
        eng.close_bin("S001", 10, DAY1, at(0, "11:14:59"))


def test_out_of_order_event():
    eng = PatternEngine()
    eng.ingest_event(ev(0, "10:30:00"))
    with pytest.raises(OutOfOrderEvent):
        eng.ingest_event(ev(0, "10:29:59"))
    eng.ingest_event(ev(0, "10:30:00"))  # equal time is not out of order


def test_reorder_tolerance():
    eng = PatternEngine(EngineParams(reorder_tolerance_seconds=60))
    eng.ingest_event(ev(0, "10:30:00"))
    eng.ingest_event(ev(0, "10:29:30"))
    with pytest.raises(OutOfOrderEvent):
        eng.ingest_event(ev(0, "10:28:00"))


def test_snapshot():
    eng = PatternEngine()
    with pytest.raises(UnknownSocket):
        eng.snapshot("S001")
    eng.touch("S009")
    assert eng.snapshot("S009") == []
    for d in range(3):
        eng.ingest_event(ev(d, "10:30:00"))
    eng.ingest_event(ev(2, "18:10:00"))
    snap = eng.snapshot("S001")
    assert [(s.bin, s.consecutive_hits, s.active) for s in snap] == [(10, 3, True), (18, 1, False)]
    assert snap[0].render(60) == "bin=10 window=10:00-11:00 hits=3 active=true"


def test_independent_bins_per_socket():
    eng = PatternEngine()
    for d in range(3):
        eng.ingest_event(ev(d, "07:10:00"))
        eng.ingest_event(ev(d, "19:40:00"))
    assert [s.active for s in eng.snapshot("S001")] == [True, True]


@pytest.mark.parametrize("kw", [dict(pattern_days=1), dict(grace_minutes=-1),
                                dict(bin_size_minutes=7), dict(reorder_tolerance_seconds=-1)])
def test_bad_params(kw):
    with pytest.raises(ConfigError):
        EngineParams(**kw)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 14), st.integers(2, 5),
       st.sampled_from([60, 120, 180, 360]))
def test_matches_oracle(seed, n_days, k, size):
    rng = random.Random(seed)
    per_day = 1440 // size
    times = random_schedule(rng, n_days, per_day, size)
    _, alarms = run_schedule(times, EngineParams(pattern_days=k, bin_size_minutes=size), n_days)
    got = {((a.date - DAY1).days, a.bin) for a in alarms}
    assert got == absence_alarms(as_slots(times, size), n_days, per_day, k)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_duplicates_are_idempotent(seed):
    rng = random.Random(seed)
    times = random_schedule(rng, 8, 24, 60)
    doubled = sorted(times + times)
    p = EngineParams()
    e1, a1 = run_schedule(times, p, 8)
    e2, a2 = run_schedule(doubled, p, 8)
    assert a1 == a2
    assert e1.snapshot("S001") == e2.snapshot("S001")


def test_alarm_keys_unique():
    rng = random.Random(7)
    times = random_schedule(rng, 14, 24, 60)
    _, alarms = run_schedule(times, EngineParams(pattern_days=2), 14)
    keys = [a.dedupe_key for a in alarms]
    assert len(keys) == len(set(keys)) and keys


def test_next_day_event_before_close_full_day_bins():
    """With one bin per day, day d+1's events arrive before day d closes."""
    p = EngineParams(pattern_days=2, bin_size_minutes=1440)
    eng = PatternEngine(p)
    for d in range(3):
        eng.ingest_event(ev(d, "00:05:00"))
        if d:
            assert close(eng, d - 1, index=0) is None
    eng.ingest_event(ev(3, "00:05:00"))
    assert close(eng, 2, index=0) is None
    assert eng.snapshot("S001")[0].consecutive_hits == 4

    # day 4 silent, day 5 event lands before day 4 closes: streak of 4 ended on day 3
    eng.ingest_event(ev(5, "00:05:00"))
    assert close(eng, 3, index=0) is None
    alarm = close(eng, 4, index=0)
    assert alarm is not None and alarm.date == DAY1 + dt.timedelta(days=4)
    # the day-5 hit survives the alarm
    assert eng.snapshot("S001")[0].consecutive_hits == 1


def test_straggler_after_alarm_restarts_streak():
    eng = PatternEngine()
    for d in range(3):
        eng.ingest_event(ev(d, "10:30:00"))
        close(eng, d)
    assert close(eng, 3) is not None
    # the day-4 SMS shows up late: it starts a fresh streak, it does not revive the old one
    assert eng.ingest_event(ev(3, "10:59:00")).consecutive_hits == 1
    assert eng.ingest_event(ev(4, "10:10:00")).consecutive_hits == 2
