"""Closed-form probabilities and expectations for conservative multi-stage designs.

All expectations are the large-population (asymptotic) expressions; the
finite-population gap is measured by simulation, never corrected here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from rsgt.design import IndividualTesting, Plan, validate_plan
from rsgt.errors import DomainError, ValidationError, WeightArityMismatch


def _check_prob(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p}")
    return p


def _check_size(value: int, name: str) -> int:
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise DomainError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class PopulationModel:
    """``n`` members, each defective independently with probability ``p``."""

    n: int
    p: float

    def __post_init__(self):
        _check_size(self.n, "n")
        object.__setattr__(self, "p", _check_prob(self.p))

    @property
    def q(self) -> float:
        return 1.0 - self.p


@dataclass(frozen=True)
class DurationWeights:
    """Time units spent per stage, the final individual stage included."""

    w: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.w)
        if not w:
            raise ValidationError("duration weights must not be empty")
        if any(not math.isfinite(x) or x < 0 for x in w):
            raise ValidationError(f"duration weights must be finite and non-negative, got {w}")
        object.__setattr__(self, "w", w)

    @classmethod
    def ones(cls, k: int) -> DurationWeights:
        return cls((1.0,) * (k + 1))

    def __len__(self) -> int:
        return len(self.w)

    def check_arity(self, plan: Plan) -> None:
        if len(self.w) != plan.k + 1:
            raise WeightArityMismatch(f"plan has {plan.k} pooled stage(s) and needs {plan.k + 1} weights, got {len(self.w)}")


def coerce_weights(weights: DurationWeights | Sequence[float] | None, plan: Plan) -> DurationWeights:
    if weights is None:
        weights = DurationWeights.ones(plan.k)
    elif not isinstance(weights, DurationWeights):
        weights = DurationWeights(tuple(weights))
    weights.check_arity(plan)
    return weights


def group_negative_prob(p: float, s: int) -> float:
    """Probability that a pool of ``s`` members holds no defective."""
    p = _check_prob(p)
    s = _check_size(s, "s")
    return (1.0 - p) ** s


def suspected_prob(p: float, s: int, r: int) -> float:
    """Probability that a member is still ambiguous after a stage of ``r`` joint tests in pools of ``s``.

    A member stays suspected when it is defective, or when it is clean but
    every one of its ``r`` pools contains a defective among the other
    ``s - 1`` members: ``p + q * (1 - q**(s-1))**r``.
    """
    p = _check_prob(p)
    s = _check_size(s, "s")
    r = _check_size(r, "r")
    q = 1.0 - p
    return p + q * (1.0 - q ** (s - 1)) ** r


def suspected_chain(plan: Plan, p: float) -> list[float]:
    """Per-stage suspected fractions of the whole population, one per pooled stage."""
    return [suspected_prob(p, st.s, st.r) for st in plan.stages]


def etm(plan: Plan, model: PopulationModel) -> float:
    """Expected tests per member.

    The summation order here is mirrored by the optimizer so that the two
    produce bit-identical values for the same plan.
    """
    validate_plan(plan, model.n)
    if isinstance(plan, IndividualTesting):
        return 1.0
    p = model.p
    stages = plan.stages
    total = stages[0].r / stages[0].s
    for prev, cur in zip(stages, stages[1:]):
        total = total + cur.r / cur.s * suspected_prob(p, prev.s, prev.r)
    last = stages[-1]
    return total + suspected_prob(p, last.s, last.r)


def expected_tests(plan: Plan, model: PopulationModel) -> float:
    if isinstance(plan, IndividualTesting):
        validate_plan(plan, model.n)
        return float(model.n)
    return model.n * etm(plan, model)


def expected_duration(plan: Plan, model: PopulationModel, weights: DurationWeights | Sequence[float] | None = None) -> float:
    """Expected member-time units, with the joint tests of a stage run in parallel."""
    validate_plan(plan, model.n)
    weights = coerce_weights(weights, plan)
    w = weights.w
    total = w[0]
    for l, st in enumerate(plan.stages, start=1):
        total += w[l] * suspected_prob(model.p, st.s, st.r)
    return model.n * total


def binary_entropy(p: float) -> float:
    p = _check_prob(p)
    if p == 0.0 or p == 1.0:
        return 0.0
    q = 1.0 - p
    return -p * math.log2(p) - q * math.log2(q)


def counting_bound(model: PopulationModel) -> float:
    """Information-theoretic lower bound ``H(p) * n`` on the expected number of tests."""
    return binary_entropy(model.p) * model.n


def rate(plan: Plan, model: PopulationModel) -> float:
    """Bits learned per expected test; 0 when the entropy is 0."""
    h = counting_bound(model)
    if h == 0.0:
        return 0.0
    return h / expected_tests(plan, model)


def binomial_asymptotic_ratio(n: int, s: int) -> float:
    """``C(n, s) / (n**s / s!)``, evaluated in log space."""
    n = _check_size(n, "n")
    s = _check_size(s, "s")
    if s > n:
        raise DomainError(f"s = {s} exceeds n = {n}")
    # the s! cancels: ratio = prod_{i<s} (1 - i/n)
    return math.exp(math.fsum(math.log1p(-i / n) for i in range(s)))
