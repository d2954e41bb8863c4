"""Acceptance criteria, one marked group per criterion.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints a
PASS/FAIL line per criterion. Oracles are written out independently of the
package wherever the criterion calls for one.
"""

from __future__ import annotations

import itertools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from rsgt.analytic import PopulationModel, etm, rate
from rsgt.design import GROUP_PRESETS, DesignPlan, PresetId
from rsgt.experiment import SweepConfig, run_sweep
from rsgt.metrics import INTERVAL_LABELS, interval_mape
from rsgt.optimizer import OptimizationSpec, feasibility_threshold, optimize
from rsgt.simulator import generate_population, load_fixture, replicate, run_trial, run_trial_with_assignment

FIXTURES = Path(__file__).parent / "fixtures"
P = DesignPlan.from_pairs


def criterion(n):
    return pytest.mark.criterion(n)


# -- 1 ---------------------------------------------------------------------------


def dorfman(p, s):
    return 1 / s + 1 - (1 - p) ** s


def nested_single_pooling(p, sizes):
    q = 1 - p
    total = 1 / sizes[0]
    for prev, cur in zip(sizes, sizes[1:]):
        total += (1 - q**prev) / cur
    return total + 1 - q ** sizes[-1]


def mixed(p, r, sizes):
    # (r, s_1) first stage, then single pooling
    q = 1 - p
    first = p + q * (1 - q ** (sizes[0] - 1)) ** r
    if len(sizes) == 1:
        return r / sizes[0] + first
    total = r / sizes[0] + first / sizes[1]
    for prev, cur in zip(sizes[1:], sizes[2:]):
        total += (1 - q**prev) / cur
    return total + 1 - q ** sizes[-1]


@criterion(1)
def test_formula_reductions():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(10_000):
        p = float(rng.random())
        k = int(rng.integers(1, 5))
        sizes = [int(x) for x in rng.integers(1, 201, size=k)]
        r = int(rng.integers(1, 11))
        model = PopulationModel(200, p)
        worst = max(
            worst,
            abs(etm(P([(1, sizes[0])]), model) - dorfman(p, sizes[0])),
            abs(etm(P([(1, s) for s in sizes]), model) - nested_single_pooling(p, sizes)),
            abs(etm(P([(r, sizes[0])] + [(1, s) for s in sizes[1:]]), model) - mixed(p, r, sizes)),
        )
    elapsed = time.perf_counter() - start
    assert worst <= 1e-12
    assert elapsed < 1.0, f"{elapsed:.2f}s"


# -- 2 ---------------------------------------------------------------------------


@criterion(2)
def test_sp_two_matches_exhaustive_enumeration():
    start = time.perf_counter()
    for p in (0.005, 0.01, 0.02, 0.05, 0.1):
        values = [1 / s + 1 - (1 - p) ** s for s in range(2, 501)]
        best = int(np.argmin(values))
        res = optimize(OptimizationSpec(preset=PresetId.SP_TWO, s_max=500), PopulationModel(1000, p))
        assert res.plan.s_vec == (best + 2,)
        assert abs(res.etm_value - values[best]) <= 1e-12
        if p == 0.01:
            assert res.plan.s_vec == (11,)
            assert abs(res.etm_value - 0.195571) <= 1e-6
    assert time.perf_counter() - start < 1.0


# -- 3 ---------------------------------------------------------------------------

THRESHOLD_TARGETS = {1: (0.35, 0.03), 2: (0.182, 0.02), 3: (0.077, 0.02)}


@pytest.fixture(scope="module")
def thresholds():
    start = time.perf_counter()
    values = {preset: feasibility_threshold(preset, p_step=0.001) for preset in GROUP_PRESETS}
    return values, time.perf_counter() - start


@criterion(3)
@pytest.mark.parametrize("preset", GROUP_PRESETS, ids=lambda p: p.slug)
def test_feasibility_threshold(preset, thresholds):
    values, elapsed = thresholds
    target, tol = THRESHOLD_TARGETS[preset.k]
    assert elapsed < 30
    assert abs(values[preset] - target) <= tol + 1e-12, f"{preset.value}: {values[preset]} vs {target} +/- {tol}"


# -- 4, 5, 6 -----------------------------------------------------------------------


@pytest.fixture(scope="session")
def sweep_1000():
    config = SweepConfig(n=1000, p_start=0.0, p_end=0.35, p_step=0.005, m_val=100)
    start = time.perf_counter()
    records = run_sweep(config)
    return records, time.perf_counter() - start


@pytest.fixture(scope="session")
def sweep_100():
    config = SweepConfig(n=100, p_start=0.0, p_end=0.35, p_step=0.005, m_val=100)
    start = time.perf_counter()
    records = run_sweep(config)
    return records, time.perf_counter() - start


def _interval_failures(records, preset, fields, limit):
    table = interval_mape([r for r in records if r.preset is preset], *fields)
    cells = {INTERVAL_LABELS[iv]: v for (_, _, iv), v in table.items() if v is not None}
    assert cells, f"{preset.value} has no usable grid point"
    return cells, {label: round(v, 3) for label, v in cells.items() if v > limit}


@criterion(4)
@pytest.mark.slow
@pytest.mark.parametrize("preset", GROUP_PRESETS, ids=lambda p: p.slug)
def test_tests_mape_n1000(preset, sweep_1000):
    records, elapsed = sweep_1000
    assert elapsed < 600
    _, bad = _interval_failures(records, preset, ("etm", "atm"), 3.0)
    assert not bad, f"{preset.value} MAPE above 3%: {bad}"


@criterion(5)
@pytest.mark.slow
def test_small_n_range_covers_etm(sweep_100):
    records, elapsed = sweep_100
    assert elapsed < 300
    usable = [r for r in records if r.usable]
    inside = [r.t_min / r.n <= r.etm <= r.t_max / r.n for r in usable]
    share = sum(inside) / len(inside)
    assert share >= 0.95, f"{share:.3f} of {len(inside)} grid points"


@criterion(6)
@pytest.mark.slow
@pytest.mark.parametrize("preset", GROUP_PRESETS, ids=lambda p: p.slug)
def test_duration_mape_n1000(preset, sweep_1000):
    records, _ = sweep_1000
    _, bad = _interval_failures(records, preset, ("exp_duration_pm", "avg_duration_pm"), 2.0)
    assert not bad, f"{preset.value} duration MAPE above 2%: {bad}"


# -- 7 ---------------------------------------------------------------------------

RATE_GRID = [round(0.005 * i, 3) for i in range(1, 12)]


@pytest.fixture(scope="module")
def optimal_rates():
    out = {}
    for p in RATE_GRID:
        model = PopulationModel(1000, p)
        for preset in GROUP_PRESETS:
            out[(preset, p)] = rate(optimize(OptimizationSpec(preset=preset), model).plan, model)
    return out


@criterion(7)
@pytest.mark.parametrize("dp, sp", [(PresetId.DP_THREE, PresetId.SP_THREE), (PresetId.DP_FOUR, PresetId.SP_FOUR)], ids=["three", "four"])
def test_double_pooling_rate_beats_single(dp, sp, optimal_rates):
    losses = {p: optimal_rates[(sp, p)] - optimal_rates[(dp, p)] for p in RATE_GRID}
    bad = {p: f"{d:.2e}" for p, d in losses.items() if d > 1e-9}
    assert not bad, f"{sp.value} ahead of {dp.value} at {bad}"


@criterion(7)
def test_rp_two_has_the_best_rate(optimal_rates):
    bad = {}
    for p in RATE_GRID:
        best_other = max((optimal_rates[(pr, p)], pr.value) for pr in GROUP_PRESETS if pr is not PresetId.RP_TWO)
        gap = best_other[0] - optimal_rates[(PresetId.RP_TWO, p)]
        if gap > 1e-9:
            bad[p] = f"{best_other[1]} +{gap:.2e}"
    assert not bad, f"RP-Two beaten at {bad}"


# -- 8 ---------------------------------------------------------------------------


def partitions_3331(n=10):
    """Every split of range(n) into three unordered triples and one singleton, as group-id rows."""
    rows = []
    for single in range(n):
        rest = [i for i in range(n) if i != single]

        def triples(items):
            if not items:
                yield []
                return
            head = items[0]
            for pair in itertools.combinations(items[1:], 2):
                remaining = [x for x in items[1:] if x not in pair]
                for tail in triples(remaining):
                    yield [(head,) + pair] + tail

        for split in triples(rest):
            gid = np.empty(n, dtype=np.int64)
            gid[single] = 3
            for g, members in enumerate(split):
                gid[list(members)] = g
            rows.append(gid)
    return np.array(rows)


def exact_expected_tests(n, s, r, p):
    """Average total tests over all state vectors and all equally likely pool splits."""
    assert (n, s) == (10, 3)
    parts = partitions_3331(n)
    assert len(parts) == math.factorial(10) // (math.factorial(3) ** 3 * math.factorial(3))
    onehot = np.eye(4)[parts]  # (partitions, members, groups)
    states = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(float)
    weights = p ** states.sum(1) * (1 - p) ** (n - states.sum(1))
    positive = np.einsum("xi,kig->xkg", states, onehot) > 0
    # share of splits in which member i sits in a positive pool, for each state vector
    share = np.einsum("xkg,kig->xi", positive.astype(float), onehot) / len(parts)
    suspects = states + (1 - states) * share**r
    return float(weights @ (4 * r + suspects.sum(1)))


@criterion(8)
@pytest.mark.slow
@pytest.mark.parametrize("r", [1, 2])
@pytest.mark.parametrize("p", [0.1, 0.3])
def test_protocol_matches_exact_enumeration(r, p):
    start = time.perf_counter()
    exact = exact_expected_tests(10, 3, r, p)
    totals = np.array([o.total_tests for o in replicate(P([(r, 3)]), 10, p, None, 50_000, 8000 + r)])
    sigma = totals.std(ddof=1) / math.sqrt(totals.size)
    assert abs(totals.mean() - exact) <= 3 * sigma, f"MC {totals.mean():.4f} vs exact {exact:.4f} (sigma {sigma:.4f})"
    assert time.perf_counter() - start < 120


# -- 9 ---------------------------------------------------------------------------


@criterion(9)
def test_zero_error_fuzz():
    rng = np.random.default_rng(9)
    start = time.perf_counter()
    misses = 0
    for t in range(10_000):
        n = int(rng.integers(1, 200))
        k = int(rng.integers(1, 5))
        plan = P([(int(rng.integers(1, 5)), int(rng.integers(1, n + 1))) for _ in range(k)])
        pop = generate_population(n, float(rng.random()), t)
        out = run_trial(plan, pop, seed=10**6 + t)
        misses += out.identified_defectives != pop.defectives
    assert misses == 0
    assert time.perf_counter() - start < 30


# -- 10 --------------------------------------------------------------------------


@criterion(10)
@pytest.mark.parametrize(
    "name, total",
    [
        ("single_pooling_two_stage", 20),
        ("double_pooling_two_stage", 19),
        ("single_pooling_three_stage", 19),
        ("double_pooling_three_stage", 15),
    ],
)
def test_walkthrough_totals(name, total):
    fx = load_fixture(FIXTURES / f"{name}.json")
    out = run_trial_with_assignment(fx["plan"], fx["population"], fx["assignments"], fx["weights"])
    assert out.total_tests == total


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
