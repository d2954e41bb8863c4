"""Integer search for the stage parameters minimising expected tests per member.

The objective couples only neighbouring stages::

    r1/s1 + sum_l (r_l/s_l) * susp(s_{l-1}, r_{l-1}) + susp(s_k, r_k)

so the exhaustive minimum over the grid is found by a min-plus pass over
the stages instead of enumerating every combination. Partial sums are
accumulated left to right exactly as ``analytic.etm`` does, which makes the
reported optimum bit-identical to re-evaluating the returned plan. The last
transition is evaluated as a full matrix, so for k <= 2 every grid point is
compared on its complete value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rsgt.analytic import PopulationModel, group_negative_prob, suspected_prob
from rsgt.design import INDIVIDUAL, DesignPlan, IndividualTesting, Plan, PresetId
from rsgt.errors import BudgetExceeded, ValidationError

DEFAULT_R_MAX = 10
DEFAULT_MAX_EVALUATIONS = 10**8

# A stage whose pools are negative with less than this probability clears
# essentially nobody; the optimum only picks one to spend a stage cheaply.
NEGLIGIBLE_NEGATIVE_POOL = 0.01


class RMode(str, enum.Enum):
    PRESET_FIXED_R = "preset_fixed_r"
    COMMON_R = "common_r"
    FIXED_R_VECTOR = "fixed_r_vector"
    FREE_R = "free_r"


def default_s_max(n: int, p: float) -> int:
    """``min(n, max(50, ceil(10/p)))``; ``n`` at p = 0."""
    if p <= 0:
        return n
    return min(n, max(50, math.ceil(10.0 / p)))


@dataclass(frozen=True)
class OptimizationSpec:
    preset: PresetId | None = None
    mode: RMode = RMode.PRESET_FIXED_R
    k: int | None = None
    s_max: int | tuple[int, ...] | None = None
    r_max: int = DEFAULT_R_MAX
    fixed_r: tuple[int, ...] | None = None
    max_evaluations: int = DEFAULT_MAX_EVALUATIONS

    def __post_init__(self):
        if self.preset is not None:
            object.__setattr__(self, "preset", PresetId.parse(self.preset))
        object.__setattr__(self, "mode", RMode(self.mode))
        if self.mode is RMode.PRESET_FIXED_R and self.preset is None:
            raise ValidationError("preset_fixed_r mode needs a preset")
        if self.preset is None and self.k is None:
            raise ValidationError("give either a preset or a stage count k")
        if self.preset is not None and self.k is not None and self.k != self.preset.k:
            raise ValidationError(f"k = {self.k} contradicts preset {self.preset.value} (k = {self.preset.k})")
        if self.r_max < 1:
            raise ValidationError("r_max must be >= 1")
        if self.s_max is not None:
            bounds = (self.s_max,) if isinstance(self.s_max, int) else tuple(self.s_max)
            if any(b < 2 for b in bounds):
                raise ValidationError("every s_max must be >= 2")
            if not isinstance(self.s_max, int):
                object.__setattr__(self, "s_max", bounds)
                if len(bounds) != self.stage_count:
                    raise ValidationError(f"s_max lists {len(bounds)} bounds for {self.stage_count} stages")
        if self.mode is RMode.FIXED_R_VECTOR:
            if self.fixed_r is None or len(self.fixed_r) != self.stage_count:
                raise ValidationError("fixed_r_vector mode needs one r per stage")
            if any(r < 1 for r in self.fixed_r):
                raise ValidationError("fixed r values must be >= 1")
            object.__setattr__(self, "fixed_r", tuple(int(r) for r in self.fixed_r))

    @property
    def stage_count(self) -> int:
        return self.preset.k if self.preset is not None else int(self.k)

    def stage_bounds(self, model: PopulationModel) -> list[int]:
        k = self.stage_count
        if self.s_max is None:
            bounds = [default_s_max(model.n, model.p)] * k
        elif isinstance(self.s_max, int):
            bounds = [self.s_max] * k
        else:
            bounds = list(self.s_max)
        bounds = [min(b, model.n) for b in bounds]
        if any(b < 2 for b in bounds):
            raise ValidationError(f"population of {model.n} is too small for pools of two")
        return bounds

    def r_choices(self) -> list[list[list[int]]]:
        """Alternatives, each a per-stage list of admissible r values."""
        k = self.stage_count
        full = list(range(1, self.r_max + 1))
        if self.mode is RMode.PRESET_FIXED_R:
            first = [self.preset.first_r] if self.preset.first_r is not None else full
            return [[first] + [[1]] * (k - 1)]
        if self.mode is RMode.FIXED_R_VECTOR:
            return [[[r] for r in self.fixed_r]]
        if self.mode is RMode.COMMON_R:
            return [[[r]] * k for r in full]
        return [[full] * k]


@dataclass(frozen=True)
class OptimizationResult:
    plan: Plan
    etm_value: float
    feasible: bool
    evaluations: int
    # best pooled plan even when it loses to individual testing
    candidate: DesignPlan | None = field(default=None, compare=False)
    candidate_etm: float | None = field(default=None, compare=False)


def _states(r_values: Sequence[int], s_hi: int) -> tuple[np.ndarray, np.ndarray]:
    s = np.arange(2, s_hi + 1, dtype=np.int64)
    r = np.asarray(r_values, dtype=np.int64)
    return np.repeat(r, len(s)), np.tile(s, len(r))


def _susp_table(p: float, r: np.ndarray, s: np.ndarray, cache: dict) -> np.ndarray:
    out = np.empty(len(r))
    for i, key in enumerate(zip(r.tolist(), s.tolist())):
        v = cache.get(key)
        if v is None:
            v = cache[key] = suspected_prob(p, key[1], key[0])
        out[i] = v
    return out


def _first_by_key(keys: list[np.ndarray]) -> int:
    """Index of the smallest entry, ``keys[0]`` the primary key."""
    return int(np.lexsort(tuple(reversed(keys)))[0])


def _stage_search(p: float, r_sets: list[list[int]], bounds: list[int], cache: dict) -> tuple[float, list[tuple[int, int]], int]:
    k = len(r_sets)
    states = [_states(r_sets[l], bounds[l]) for l in range(k)]
    sizes = [len(st[0]) for st in states]
    evaluations = sizes[0] + sum(sizes[l - 1] * sizes[l] for l in range(1, k))
    susp = [_susp_table(p, r, s, cache) for r, s in states]

    r1, s1 = states[0]
    value = r1 / s1
    if k == 1:
        total = value + susp[0]
        hits = np.flatnonzero(total == total.min())
        best = hits[_first_by_key([r1[hits], s1[hits]])]
        return float(total[best]), [(int(r1[best]), int(s1[best]))], evaluations

    path_s = s1[:, None]
    path_r = r1[:, None]
    rsum = r1.copy()
    for l in range(1, k - 1):
        r, s = states[l]
        m = value[:, None] + (r / s)[None, :] * susp[l - 1][:, None]
        order = np.lexsort(tuple(path_s[:, j] for j in reversed(range(path_s.shape[1]))) + (rsum,))
        prev = order[np.argmin(m[order], axis=0)]
        cols = np.arange(len(r))
        value = m[prev, cols]
        path_s = np.hstack([path_s[prev], s[:, None]])
        path_r = np.hstack([path_r[prev], r[:, None]])
        rsum = rsum[prev] + r

    r, s = states[k - 1]
    total = (value[:, None] + (r / s)[None, :] * susp[k - 2][:, None]) + susp[k - 1][None, :]
    i, j = np.nonzero(total == total.min())
    keys = [rsum[i] + r[j]] + [path_s[i, c] for c in range(path_s.shape[1])] + [s[j]]
    t = _first_by_key(keys)
    bi, bj = i[t], j[t]
    pairs = [(int(rr), int(ss)) for rr, ss in zip(path_r[bi], path_s[bi])] + [(int(r[bj]), int(s[bj]))]
    return float(total[bi, bj]), pairs, evaluations


def grid_size(spec: OptimizationSpec, model: PopulationModel) -> int:
    """Objective evaluations the search will perform."""
    bounds = spec.stage_bounds(model)
    total = 0
    for r_sets in spec.r_choices():
        sizes = [len(r_sets[l]) * (bounds[l] - 1) for l in range(len(r_sets))]
        total += sizes[0] + sum(sizes[l - 1] * sizes[l] for l in range(1, len(sizes)))
    return total


def optimize(spec: OptimizationSpec, model: PopulationModel) -> OptimizationResult:
    """Minimise expected tests per member over the integer grid implied by ``spec``.

    Ties go to the smaller total of joint tests, then to the lexicographically
    smaller group-size vector. When no pooled plan beats 1 test per member the
    result is individual testing, flagged infeasible.
    """
    if spec.preset is PresetId.INDIVIDUAL:
        return OptimizationResult(INDIVIDUAL, 1.0, False, 0)
    if model.p >= 1.0:
        raise ValidationError("optimisation needs p < 1")
    needed = grid_size(spec, model)
    if needed > spec.max_evaluations:
        raise BudgetExceeded(needed, spec.max_evaluations)

    bounds = spec.stage_bounds(model)
    cache: dict = {}
    best = None
    evaluations = 0
    for r_sets in spec.r_choices():
        value, pairs, used = _stage_search(model.p, r_sets, bounds, cache)
        evaluations += used
        key = (value, sum(r for r, _ in pairs), [s for _, s in pairs])
        if best is None or key < best[0]:
            best = (key, pairs)
    (value, _, _), pairs = best
    plan = DesignPlan.from_pairs(pairs, spec.preset)
    if value < 1.0:
        return OptimizationResult(plan, value, True, evaluations, plan, value)
    return OptimizationResult(INDIVIDUAL, 1.0, False, evaluations, plan, value)


def is_degenerate(plan: Plan, p: float) -> bool:
    """True when some pooled stage cannot clear anyone in practice.

    That is a pool of one, or pools so large that a negative result is
    improbable; an optimum only contains such a stage when the stage count
    is forced and the cheapest way to spend a stage is a throwaway pool.
    """
    if isinstance(plan, IndividualTesting):
        return False
    for st in plan.stages:
        if st.s < 2 or group_negative_prob(p, st.s) < NEGLIGIBLE_NEGATIVE_POOL:
            return True
    return False


def is_usable(result: OptimizationResult, p: float) -> bool:
    return result.feasible and not is_degenerate(result.plan, p)


def feasibility_threshold(
    preset: PresetId | str,
    spec: OptimizationSpec | None = None,
    p_step: float = 0.001,
    n: int = 1000,
    p_max: float = 1.0,
) -> float:
    """Largest grid p, scanning up from 0, before the optimum stops being usable.

    Usable means the optimised plan beats individual testing and has no
    degenerate stage. ``n`` only enters through the default group-size bounds.
    """
    if p_step <= 0:
        raise ValidationError("p_step must be positive")
    preset = PresetId.parse(preset)
    if preset is PresetId.INDIVIDUAL:
        return 0.0
    if spec is None:
        spec = OptimizationSpec(preset=preset)
    last = 0.0
    i = 0
    while True:
        p = round(i * p_step, 12)
        if p >= min(p_max, 1.0):
            break
        result = optimize(spec, PopulationModel(n, p))
        if not is_usable(result, p):
            break
        last = p
        i += 1
    return last
