"""Performance criteria computed from analytic values and simulated outcomes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from rsgt.design import Plan, PresetId
from rsgt.errors import EmptyOutcomes, LengthMismatch, UnsortedGrid, ZeroExpected
from rsgt.simulator import TrialOutcome

# closed below: a grid point equal to a cut belongs to the lower interval
INTERVAL_CUTS = (0.077, 0.182)
INTERVAL_LABELS = ("p<0.077", "0.077<p<0.182", "p>0.182")
_CUT_EPS = 1e-12


@dataclass(frozen=True)
class SweepRecord:
    p: float
    preset: PresetId
    plan: Plan
    n: int
    etm: float
    ent: float
    atm: float
    t_min: int
    t_max: int
    rate: float
    exp_duration_pm: float
    avg_duration_pm: float
    m_val: int
    seed: int
    usable: bool = True

    @property
    def range(self) -> int:
        return self.t_max - self.t_min


def _nonempty(outcomes: Sequence[TrialOutcome]) -> Sequence[TrialOutcome]:
    if len(outcomes) == 0:
        raise EmptyOutcomes("need at least one trial outcome")
    return outcomes


def atm(outcomes: Sequence[TrialOutcome], n: int) -> float:
    """Average tests per member."""
    outcomes = _nonempty(outcomes)
    return sum(o.total_tests for o in outcomes) / len(outcomes) / n


def range_stat(outcomes: Sequence[TrialOutcome]) -> int:
    outcomes = _nonempty(outcomes)
    totals = [o.total_tests for o in outcomes]
    return max(totals) - min(totals)


def avg_duration_per_member(outcomes: Sequence[TrialOutcome], n: int) -> float:
    outcomes = _nonempty(outcomes)
    return sum(o.duration_total for o in outcomes) / len(outcomes) / n


def mape(expected: Sequence[float], observed: Sequence[float]) -> float:
    """Mean absolute percentage error of ``observed`` against ``expected``, in percent."""
    expected = np.asarray(expected, dtype=float)
    observed = np.asarray(observed, dtype=float)
    if expected.shape != observed.shape:
        raise LengthMismatch(f"{expected.size} expected values vs {observed.size} observed")
    if expected.size == 0:
        raise LengthMismatch("mape of empty series")
    if np.any(expected == 0):
        raise ZeroExpected("expected series contains zeros")
    return float(np.mean(np.abs((expected - observed) / expected)) * 100.0)


def interval_of(p: float) -> int:
    lo, hi = INTERVAL_CUTS
    if p <= lo + _CUT_EPS:
        return 0
    if p <= hi + _CUT_EPS:
        return 1
    return 2


def interval_partition(p_grid: Sequence[float]) -> tuple[list[int], list[int], list[int]]:
    """Indices of ``p_grid`` falling in each of the three probability intervals."""
    grid = list(p_grid)
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise UnsortedGrid("probability grid must be sorted ascending")
    parts: tuple[list[int], list[int], list[int]] = ([], [], [])
    for i, p in enumerate(grid):
        parts[interval_of(p)].append(i)
    return parts


def interval_mape(
    records: Iterable[SweepRecord],
    expected_field: str = "etm",
    observed_field: str = "atm",
) -> dict[tuple[PresetId, int, int], float | None]:
    """MAPE per (preset, n, interval) over the usable grid points; ``None`` where there are none."""
    groups: dict[tuple[PresetId, int, int], list[SweepRecord]] = {}
    keys: set[tuple[PresetId, int]] = set()
    for rec in records:
        keys.add((rec.preset, rec.n))
        if rec.usable:
            groups.setdefault((rec.preset, rec.n, interval_of(rec.p)), []).append(rec)
    table: dict[tuple[PresetId, int, int], float | None] = {}
    for preset, n in keys:
        for iv in range(3):
            rows = groups.get((preset, n, iv))
            if not rows:
                table[(preset, n, iv)] = None
                continue
            table[(preset, n, iv)] = mape(
                [getattr(r, expected_field) for r in rows], [getattr(r, observed_field) for r in rows]
            )
    return table


def table_rows(table: Mapping[tuple[PresetId, int, int], float | None], absent: str = "-") -> tuple[list[str], list[list[str]]]:
    """Lay a MAPE table out as rows = presets, columns = n x interval."""
    presets = sorted({k[0] for k in table}, key=lambda p: list(PresetId).index(p))
    ns = sorted({k[1] for k in table})
    header = ["preset"] + [f"n={n}:{label}" for n in ns for label in INTERVAL_LABELS]
    rows = []
    for preset in presets:
        row = [preset.value]
        for n in ns:
            for iv in range(3):
                v = table.get((preset, n, iv))
                row.append(absent if v is None else f"{v:.9g}")
        rows.append(row)
    return header, rows
