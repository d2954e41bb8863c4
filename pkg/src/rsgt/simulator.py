"""Monte Carlo execution of the conservative multi-stage pooling protocol.

Randomness comes from numpy's PCG64 fed by ``SeedSequence``. ``split_seed``
derives child seeds from a parent seed and integer keys, so trial ``i`` of a
replication always sees the same stream regardless of scheduling.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from rsgt.analytic import DurationWeights, _check_prob, coerce_weights
from rsgt.design import DesignPlan, IndividualTesting, Plan, validate_plan
from rsgt.errors import AssignmentMismatch, ValidationError

PRNG_ID = "numpy.PCG64/SeedSequence(entropy=seed, spawn_key=keys)"


def split_seed(seed: int, *keys: int) -> int:
    """Child 64-bit seed of ``seed`` under the integer path ``keys``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


@dataclass(frozen=True)
class PopulationState:
    states: np.ndarray

    def __post_init__(self):
        arr = np.array(self.states, dtype=bool)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("population states must be a non-empty 1-d vector")
        arr.setflags(write=False)
        object.__setattr__(self, "states", arr)

    @property
    def n(self) -> int:
        return int(self.states.size)

    @property
    def defectives(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.states).tolist())

    @classmethod
    def from_defectives(cls, n: int, defectives: Sequence[int]) -> PopulationState:
        states = np.zeros(n, dtype=bool)
        states[list(defectives)] = True
        return cls(states)


@dataclass(frozen=True)
class StageAssignment:
    """The ``r`` orderings of the current suspects used in one stage."""

    permutations: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "permutations", tuple(tuple(int(i) for i in perm) for perm in self.permutations))


@dataclass(frozen=True)
class TrialOutcome:
    stage_tests: tuple[int, ...]
    exit_stage: np.ndarray = field(repr=False)
    identified_defectives: frozenset[int]
    duration_total: float
    seed: int | None = None

    @property
    def total_tests(self) -> int:
        return int(sum(self.stage_tests))

    @property
    def n(self) -> int:
        return int(self.exit_stage.size)

    def entering(self, stage: int) -> int:
        """Members taking part in ``stage`` (1-based)."""
        return int(np.count_nonzero(self.exit_stage >= stage))

    def exit_histogram(self) -> list[int]:
        return np.bincount(self.exit_stage, minlength=len(self.stage_tests) + 1)[1:].tolist()

    def summary(self) -> dict:
        return {
            "stage_tests": list(self.stage_tests),
            "total_tests": self.total_tests,
            "exit_histogram": self.exit_histogram(),
            "identified_defectives": sorted(self.identified_defectives),
            "duration_total": self.duration_total,
        }


def generate_population(n: int, p: float, seed: int) -> PopulationState:
    p = _check_prob(p)
    if n < 1:
        raise ValidationError("n must be positive")
    return PopulationState(make_rng(seed).random(n) < p)


# draw(stage, round, suspects) -> suspects in pooling order
Drawer = Callable[[int, int, np.ndarray], np.ndarray]


def _execute(plan: Plan, population: PopulationState, weights: DurationWeights, draw: Drawer, seed=None) -> TrialOutcome:
    defect = population.states
    n = population.n
    w = weights.w
    exit_stage = np.ones(n, dtype=np.int64)
    if isinstance(plan, IndividualTesting):
        found = frozenset(np.flatnonzero(defect).tolist())
        return TrialOutcome((n,), exit_stage, found, w[0] * n, seed)

    suspects = np.arange(n)
    tests = []
    positive = np.zeros(n, dtype=bool)
    for l, st in enumerate(plan.stages, start=1):
        m = suspects.size
        exit_stage[suspects] = l
        if m == 0:
            tests.append(0)
            continue
        size = min(st.s, m)
        n_groups = -(-m // size)
        group_of = np.arange(m) // size
        keep = np.ones(m, dtype=bool)
        for j in range(st.r):
            order = draw(l, j, suspects)
            hit = np.bincount(group_of, weights=defect[order], minlength=n_groups) > 0
            positive[order] = hit[group_of]
            keep &= positive[suspects]
        tests.append(st.r * n_groups)
        suspects = suspects[keep]
    final = plan.k + 1
    exit_stage[suspects] = final
    tests.append(int(suspects.size))
    found = frozenset(suspects[defect[suspects]].tolist())
    duration = float(sum(w[l - 1] * np.count_nonzero(exit_stage >= l) for l in range(1, final + 1)))
    return TrialOutcome(tuple(int(t) for t in tests), exit_stage, found, duration, seed)


def run_trial(
    plan: Plan,
    population: PopulationState,
    weights: DurationWeights | Sequence[float] | None = None,
    seed: int = 0,
    rng=None,
) -> TrialOutcome:
    """One pass of the protocol with seeded Fisher-Yates shuffles.

    ``rng`` overrides the seeded generator; anything with a numpy-style
    ``permutation(m)`` works.
    """
    validate_plan(plan, population.n)
    weights = coerce_weights(weights, plan)
    if rng is None:
        rng = make_rng(seed)

    def draw(stage, round_, suspects):
        return suspects[rng.permutation(suspects.size)]

    return _execute(plan, population, weights, draw, seed)


def run_trial_with_assignment(
    plan: Plan,
    population: PopulationState,
    assignments: Sequence[StageAssignment],
    weights: DurationWeights | Sequence[float] | None = None,
) -> TrialOutcome:
    """Run the protocol with caller-supplied pooling orders, checked stage by stage."""
    validate_plan(plan, population.n)
    weights = coerce_weights(weights, plan)
    if len(assignments) != plan.k:
        raise AssignmentMismatch(len(assignments), f"plan has {plan.k} pooled stage(s), got {len(assignments)} assignment(s)")

    def draw(stage, round_, suspects):
        perms = assignments[stage - 1].permutations
        if len(perms) != plan.stages[stage - 1].r:
            raise AssignmentMismatch(stage, f"expected {plan.stages[stage - 1].r} permutation(s), got {len(perms)}")
        perm = np.asarray(perms[round_], dtype=np.int64)
        if perm.size != suspects.size or not np.array_equal(np.sort(perm), suspects):
            raise AssignmentMismatch(
                stage, f"permutation {round_ + 1} does not cover the suspects {suspects.tolist()}"
            )
        return perm

    return _execute(plan, population, weights, draw)


def _trial_seeds(base_seed: int, i: int) -> tuple[int, int]:
    trial = split_seed(base_seed, i)
    return split_seed(trial, 0), split_seed(trial, 1)


def _replicate_chunk(args) -> list[TrialOutcome]:
    plan, n, p, weights, base_seed, indices = args
    out = []
    for i in indices:
        pop_seed, shuffle_seed = _trial_seeds(base_seed, i)
        population = generate_population(n, p, pop_seed)
        out.append(run_trial(plan, population, weights, shuffle_seed))
    return out


def replicate(
    plan: Plan,
    n: int,
    p: float,
    weights: DurationWeights | Sequence[float] | None,
    m_val: int,
    base_seed: int,
    workers: int = 1,
) -> list[TrialOutcome]:
    """``m_val`` independent trials, each with a fresh Bernoulli population."""
    if m_val < 1:
        raise ValidationError("m_val must be >= 1")
    validate_plan(plan, n)
    weights = coerce_weights(weights, plan)
    if workers <= 1 or m_val < 2 * workers:
        return _replicate_chunk((plan, n, p, weights, base_seed, range(m_val)))
    chunks = [range(lo, min(lo + -(-m_val // workers), m_val)) for lo in range(0, m_val, -(-m_val // workers))]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_replicate_chunk, [(plan, n, p, weights, base_seed, c) for c in chunks])
        return [o for part in parts for o in part]


def load_fixture(path: str | Path) -> dict:
    """Read a fixture file describing a population and per-stage pooling orders.

    Layout::

        {"n": 25, "defectives": [1, 3, 22], "index_base": 1,
         "plan": {"stages": [{"r": 2, "s": 5}]},
         "weights": [1, 1],
         "assignments": [{"permutations": [[...], [...]]}]}

    ``index_base`` (default 0) applies to ``defectives`` and the permutations.
    """
    data = json.loads(Path(path).read_text())
    try:
        base = int(data.get("index_base", 0))
        n = int(data["n"])
        population = PopulationState.from_defectives(n, [int(i) - base for i in data["defectives"]])
        plan = DesignPlan.from_dict(data["plan"])
        assignments = [
            StageAssignment(tuple(tuple(int(i) - base for i in perm) for perm in stage["permutations"]))
            for stage in data["assignments"]
        ]
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError(f"malformed fixture file {path}: {exc}") from exc
    weights = data.get("weights")
    return {
        "population": population,
        "plan": plan,
        "assignments": assignments,
        "weights": DurationWeights(tuple(weights)) if weights is not None else None,
    }
