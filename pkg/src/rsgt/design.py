"""Testing-plan types, the named study presets, and plan validation."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from rsgt.errors import (
    ArityMismatch,
    GroupSizeExceedsPopulation,
    NonPositiveParameter,
    PlanError,
    RValueForbidden,
    RValueRequired,
)


class PresetId(str, enum.Enum):
    INDIVIDUAL = "Individual"
    SP_TWO = "SP-Two"
    DP_TWO = "DP-Two"
    RP_TWO = "RP-Two"
    SP_THREE = "SP-Three"
    DP_THREE = "DP-Three"
    SP_FOUR = "SP-Four"
    DP_FOUR = "DP-Four"

    @classmethod
    def parse(cls, text: str | PresetId) -> PresetId:
        """Accept ``SP-Two``, ``sp-two``, ``sp_two`` and the like."""
        if isinstance(text, PresetId):
            return text
        key = str(text).strip().lower().replace("_", "-")
        for member in cls:
            if member.value.lower() == key:
                return member
        raise PlanError(f"unknown preset {text!r}; expected one of {[m.value for m in cls]}")

    @property
    def k(self) -> int:
        """Number of group stages (the individual retest stage is not counted)."""
        return _PRESET_SHAPE[self][0]

    @property
    def first_r(self) -> int | None:
        """Fixed joint-test count of stage 1, ``None`` when it is free (RP-Two)."""
        return _PRESET_SHAPE[self][1]

    @property
    def slug(self) -> str:
        return self.value.lower()


# (k, r_1); r_l = 1 for every later stage.
_PRESET_SHAPE: dict[PresetId, tuple[int, int | None]] = {
    PresetId.INDIVIDUAL: (0, None),
    PresetId.SP_TWO: (1, 1),
    PresetId.DP_TWO: (1, 2),
    PresetId.RP_TWO: (1, None),
    PresetId.SP_THREE: (2, 1),
    PresetId.DP_THREE: (2, 2),
    PresetId.SP_FOUR: (3, 1),
    PresetId.DP_FOUR: (3, 2),
}

GROUP_PRESETS: tuple[PresetId, ...] = tuple(p for p in PresetId if p is not PresetId.INDIVIDUAL)


def _check_positive_int(value, stage: int, field: str) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise NonPositiveParameter(stage, field, value)


@dataclass(frozen=True)
class StagePlan:
    """One pooled stage: every member enters ``r`` joint tests of ``s`` members."""

    r: int
    s: int

    @property
    def degenerate(self) -> bool:
        # a group of one clears nobody but its own member
        return self.s == 1

    def __str__(self) -> str:
        return f"{self.r}x{self.s}"


@dataclass(frozen=True)
class DesignPlan:
    """Ordered pooled stages; the final individual-retest stage is implicit."""

    stages: tuple[StagePlan, ...]
    label: PresetId | None = None

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise PlanError("a plan needs at least one pooled stage; use INDIVIDUAL for k = 0")
        for l, st in enumerate(stages, start=1):
            _check_positive_int(st.r, l, "r")
            _check_positive_int(st.s, l, "s")
        object.__setattr__(self, "stages", stages)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[int]], label: PresetId | None = None) -> DesignPlan:
        return cls(tuple(StagePlan(int(r), int(s)) for r, s in pairs), label)

    @property
    def k(self) -> int:
        return len(self.stages)

    @property
    def r_vec(self) -> tuple[int, ...]:
        return tuple(st.r for st in self.stages)

    @property
    def s_vec(self) -> tuple[int, ...]:
        return tuple(st.s for st in self.stages)

    def pairs(self) -> list[tuple[int, int]]:
        return [(st.r, st.s) for st in self.stages]

    def to_dict(self) -> dict:
        out: dict = {"stages": [{"r": st.r, "s": st.s} for st in self.stages]}
        if self.label is not None:
            out["label"] = self.label.value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> DesignPlan:
        try:
            stages = data["stages"]
            pairs = [(st["r"], st["s"]) for st in stages]
        except (KeyError, TypeError) as exc:
            raise PlanError(f"malformed plan record {data!r}") from exc
        label = data.get("label")
        for l, (r, s) in enumerate(pairs, start=1):
            _check_positive_int(r, l, "r")
            _check_positive_int(s, l, "s")
        return cls.from_pairs(pairs, PresetId.parse(label) if label else None)

    def shorthand(self) -> str:
        return ",".join(str(st) for st in self.stages)

    def __str__(self) -> str:
        return self.shorthand()


@dataclass(frozen=True)
class IndividualTesting:
    """Test every member on its own; exactly n tests."""

    label: PresetId = PresetId.INDIVIDUAL

    k = 0
    stages: tuple[StagePlan, ...] = ()

    @property
    def r_vec(self) -> tuple[int, ...]:
        return ()

    @property
    def s_vec(self) -> tuple[int, ...]:
        return ()

    def to_dict(self) -> dict:
        return {"stages": [], "label": PresetId.INDIVIDUAL.value}

    def shorthand(self) -> str:
        return "individual"

    def __str__(self) -> str:
        return "individual"


INDIVIDUAL = IndividualTesting()

Plan = Union[DesignPlan, IndividualTesting]


def validate_plan(plan: Plan, n: int) -> None:
    """Raise unless every stage has ``r >= 1`` and ``1 <= s <= n``."""
    _check_positive_int(n, 0, "n")
    if isinstance(plan, IndividualTesting):
        return
    for l, st in enumerate(plan.stages, start=1):
        _check_positive_int(st.r, l, "r")
        _check_positive_int(st.s, l, "s")
        if st.s > n:
            raise GroupSizeExceedsPopulation(l, st.s, n)


def instantiate_preset(preset: PresetId | str, stage_sizes: Sequence[int], r_value: int | None = None) -> DesignPlan:
    preset = PresetId.parse(preset)
    if preset is PresetId.INDIVIDUAL:
        raise PlanError("the Individual preset has no stage sizes; use INDIVIDUAL")
    sizes = list(stage_sizes)
    if len(sizes) != preset.k:
        raise ArityMismatch(f"{preset.value} takes {preset.k} stage size(s), got {len(sizes)}")
    if preset.first_r is None:
        if r_value is None:
            raise RValueRequired(f"{preset.value} needs an explicit r for stage 1")
        r1 = r_value
    else:
        if r_value is not None:
            raise RValueForbidden(f"{preset.value} fixes r_1 = {preset.first_r}")
        r1 = preset.first_r
    _check_positive_int(r1, 1, "r")
    pairs = [(r1, sizes[0])] + [(1, s) for s in sizes[1:]]
    for l, (_, s) in enumerate(pairs, start=1):
        _check_positive_int(s, l, "s")
    return DesignPlan.from_pairs(pairs, preset)


def parse_plan(text: str) -> Plan:
    """Parse the ``RxS`` shorthand, e.g. ``"2x5,1x3"``; ``"individual"`` gives INDIVIDUAL."""
    text = text.strip()
    if text.lower() in ("individual", "0", ""):
        return INDIVIDUAL
    pairs = []
    for l, token in enumerate(text.split(","), start=1):
        parts = token.strip().lower().split("x")
        if len(parts) != 2:
            raise PlanError(f"bad stage token {token!r}; expected RxS such as 2x5")
        try:
            r, s = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise PlanError(f"bad stage token {token!r}; expected RxS such as 2x5") from exc
        _check_positive_int(r, l, "r")
        _check_positive_int(s, l, "s")
        pairs.append((r, s))
    return DesignPlan.from_pairs(pairs)


def plan_from_vectors(r_vec: Sequence[int], s_vec: Sequence[int], label: PresetId | None = None) -> Plan:
    if len(r_vec) != len(s_vec):
        raise PlanError(f"r and s vectors differ in length: {list(r_vec)} vs {list(s_vec)}")
    if not r_vec:
        return INDIVIDUAL
    return DesignPlan.from_pairs(zip(r_vec, s_vec), label)
