import numpy as np
import pytest
from hypothesis import given, strategies as st

from rsgt.design import DesignPlan, PresetId
from rsgt.errors import EmptyOutcomes, LengthMismatch, UnsortedGrid, ZeroExpected
from rsgt.experiment import p_grid
from rsgt.metrics import (
    SweepRecord,
    atm,
    avg_duration_per_member,
    interval_mape,
    interval_partition,
    mape,
    range_stat,
    table_rows,
)
from rsgt.simulator import TrialOutcome, generate_population, replicate, run_trial

P = DesignPlan.from_pairs


def fake(total, n=10, duration=0.0):
    return TrialOutcome((total,), np.ones(n, dtype=np.int64), frozenset(), duration)


def test_atm_and_range():
    assert atm([fake(5, 25)] * 100, 25) == 0.2
    assert atm([fake(150, 1000), fake(250, 1000)], 1000) == 0.2
    assert range_stat([fake(7)] * 3) == 0
    assert range_stat([fake(150), fake(250)]) == 100
    outs = replicate(P([(1, 5)]), 25, 0, None, 50, 1)
    assert atm(outs, 25) == 0.2 and range_stat(outs) == 0
    for fn in (lambda: atm([], 5), lambda: range_stat([]), lambda: avg_duration_per_member([], 5)):
        with pytest.raises(EmptyOutcomes):
            fn()


def test_durations():
    assert avg_duration_per_member(replicate(P([(2, 7), (1, 3)]), 50, 0, None, 10, 3), 50) == 1
    assert avg_duration_per_member(replicate(P([(1, 6)]), 50, 1, None, 10, 3), 50) == 2
    outs = replicate(P([(1, 11)]), 1000, 0.01, [1, 1], 100, 77)
    assert abs(avg_duration_per_member(outs, 1000) - 1.10466) / 1.10466 < 0.05


def test_mape_examples():
    assert mape([1, 2, 3], [1, 2, 3]) == 0
    assert mape([100, 200], [110, 180]) == pytest.approx(10.0)
    assert mape([50], [49]) == pytest.approx(2.0)
    with pytest.raises(LengthMismatch):
        mape([1, 2], [1])
    with pytest.raises(LengthMismatch):
        mape([], [])
    with pytest.raises(ZeroExpected):
        mape([0, 1], [0, 1])


@given(
    xs=st.lists(st.tuples(st.floats(0.01, 100), st.floats(0, 100)), min_size=1, max_size=20),
    c=st.floats(0.01, 100),
)
def test_mape_scale_invariant(xs, c):
    e, o = zip(*xs)
    assert mape(e, e) == 0
    assert mape([c * x for x in e], [c * x for x in o]) == pytest.approx(mape(e, o), rel=1e-9, abs=1e-9)


def test_interval_partition():
    assert interval_partition([0, 0.05, 0.1, 0.2]) == ([0, 1], [2], [3])
    assert interval_partition([0.077]) == ([0], [], [])
    assert interval_partition([0.182, 0.183]) == ([], [0], [1])
    parts = interval_partition(p_grid(0, 0.35, 0.001))
    assert [len(x) for x in parts] == [78, 105, 168]
    assert sorted(i for part in parts for i in part) == list(range(351))
    with pytest.raises(UnsortedGrid):
        interval_partition([0.1, 0.05])


def record(preset, p, etm, atm_value, usable=True, n=100):
    return SweepRecord(p, preset, P([(1, 5)]), n, etm, etm * n, atm_value, 0, 0, 0.0, 1.0, 1.0, 1, 0, usable)


def test_interval_table_and_dashes():
    recs = [
        record(PresetId.SP_TWO, 0.01, 0.2, 0.22),
        record(PresetId.SP_TWO, 0.1, 0.5, 0.5),
        record(PresetId.SP_TWO, 0.3, 0.9, 0.9, usable=False),
        record(PresetId.SP_FOUR, 0.01, 0.4, 0.3),
    ]
    table = interval_mape(recs)
    assert table[(PresetId.SP_TWO, 100, 0)] == pytest.approx(10)
    assert table[(PresetId.SP_TWO, 100, 1)] == 0
    assert table[(PresetId.SP_TWO, 100, 2)] is None
    header, rows = table_rows(table)
    assert header == ["preset", "n=100:p<0.077", "n=100:0.077<p<0.182", "n=100:p>0.182"]
    assert rows == [["SP-Two", "10", "0", "-"], ["SP-Four", "25", "-", "-"]]


def test_p_zero_replicate_has_exact_atm():
    plan = P([(2, 8), (1, 3)])
    outs = [run_trial(plan, generate_population(100, 0, i), seed=i) for i in range(5)]
    # 2 * ceil(100 / 8) joint tests and nothing else
    assert atm(outs, 100) == 26 / 100
