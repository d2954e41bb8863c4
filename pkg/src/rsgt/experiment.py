"""Probability sweeps: optimise, evaluate, simulate, and write/read the CSV tables."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from rsgt import __version__
from rsgt.analytic import DurationWeights, PopulationModel, etm, expected_duration, rate
from rsgt.design import GROUP_PRESETS, IndividualTesting, Plan, PresetId, plan_from_vectors
from rsgt.errors import SchemaMismatch, ValidationError
from rsgt.metrics import INTERVAL_LABELS, SweepRecord, atm, avg_duration_per_member, interval_mape, interval_of, table_rows
from rsgt.optimizer import OptimizationSpec, is_degenerate, optimize
from rsgt.simulator import PRNG_ID, replicate, split_seed

SWEEP_COLUMNS = (
    "preset", "n", "p", "k", "r_vec", "s_vec", "etm", "ent", "atm", "t_min", "t_max", "range",
    "rate", "exp_duration_pm", "avg_duration_pm", "m_val", "seed",
)  # fmt: skip


def fmt(x: float) -> str:
    return f"{x:.9g}"


def p_grid(start: float, end: float, step: float) -> list[float]:
    if step <= 0:
        raise ValidationError("p_step must be positive")
    if end < start:
        raise ValidationError("p_end must not be below p_start")
    count = int(math.floor((end - start) / step + 1e-9))
    return [round(start + i * step, 12) for i in range(count + 1)]


@dataclass(frozen=True)
class SweepConfig:
    n: int
    p_start: float = 0.0
    p_end: float = 0.35
    p_step: float = 0.001
    m_val: int = 100
    presets: tuple[PresetId, ...] = GROUP_PRESETS
    base_seed: int = 20250101
    # None means one time unit per stage; otherwise per-preset lists of k+1 weights
    weights: dict[str, tuple[float, ...]] | None = None
    s_max: int | None = None
    r_max: int = 10
    max_evaluations: int = 10**8
    workers: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be positive")
        if self.m_val < 1:
            raise ValidationError("m_val must be positive")
        presets = tuple(PresetId.parse(p) for p in self.presets)
        if not presets:
            raise ValidationError("at least one preset is required")
        object.__setattr__(self, "presets", presets)
        for bound in ("p_start", "p_end"):
            v = getattr(self, bound)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{bound} must lie in [0, 1]")
        p_grid(self.p_start, self.p_end, self.p_step)
        if self.weights is not None:
            w = {PresetId.parse(k).value: tuple(float(x) for x in v) for k, v in self.weights.items()}
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_mapping(cls, data: dict) -> SweepConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "presets" in data:
            presets = data["presets"]
            if presets == "all":
                presets = GROUP_PRESETS
            data["presets"] = tuple(presets)
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> SweepConfig:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(data)

    def grid(self) -> list[float]:
        return p_grid(self.p_start, self.p_end, self.p_step)

    def weights_for(self, preset: PresetId, plan: Plan) -> DurationWeights:
        if self.weights is None or preset.value not in self.weights:
            return DurationWeights.ones(plan.k)
        w = self.weights[preset.value]
        if isinstance(plan, IndividualTesting):
            # individual fallback only runs the final stage
            return DurationWeights((w[-1],))
        return DurationWeights(w)

    def spec_for(self, preset: PresetId) -> OptimizationSpec:
        return OptimizationSpec(preset=preset, s_max=self.s_max, r_max=self.r_max, max_evaluations=self.max_evaluations)

    def metadata(self) -> dict:
        meta = asdict(self)
        meta["presets"] = [p.value for p in self.presets]
        # results do not depend on the worker count
        meta.pop("workers")
        return {"config": meta, "prng": PRNG_ID, "version": __version__, "columns": list(SWEEP_COLUMNS)}


def cell_seed(base_seed: int, preset: PresetId, p_index: int) -> int:
    return split_seed(base_seed, list(PresetId).index(preset), p_index)


def sweep_cell(config: SweepConfig, preset: PresetId, p_index: int, p: float) -> SweepRecord:
    model = PopulationModel(config.n, p)
    result = optimize(config.spec_for(preset), model)
    plan = result.plan
    weights = config.weights_for(preset, plan)
    seed = cell_seed(config.base_seed, preset, p_index)
    outcomes = replicate(plan, config.n, p, weights, config.m_val, seed)
    totals = [o.total_tests for o in outcomes]
    return SweepRecord(
        p=p,
        preset=preset,
        plan=plan,
        n=config.n,
        etm=result.etm_value,
        ent=config.n * result.etm_value,
        atm=atm(outcomes, config.n),
        t_min=min(totals),
        t_max=max(totals),
        rate=rate(plan, model),
        exp_duration_pm=expected_duration(plan, model, weights) / config.n,
        avg_duration_pm=avg_duration_per_member(outcomes, config.n),
        m_val=config.m_val,
        seed=seed,
        usable=result.feasible and not is_degenerate(plan, p),
    )


def _cell_job(args) -> SweepRecord:
    return sweep_cell(*args)


def run_sweep(config: SweepConfig) -> list[SweepRecord]:
    """Every (preset, p) cell, in preset order then grid order."""
    jobs = [(config, preset, i, p) for preset in config.presets for i, p in enumerate(config.grid())]
    if config.workers <= 1:
        return [sweep_cell(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(_cell_job, jobs, chunksize=4))


def record_row(rec: SweepRecord) -> list[str]:
    return [
        rec.preset.value, str(rec.n), fmt(rec.p), str(rec.plan.k),
        ";".join(map(str, rec.plan.r_vec)), ";".join(map(str, rec.plan.s_vec)),
        fmt(rec.etm), fmt(rec.ent), fmt(rec.atm), str(rec.t_min), str(rec.t_max), str(rec.range),
        fmt(rec.rate), fmt(rec.exp_duration_pm), fmt(rec.avg_duration_pm), str(rec.m_val), str(rec.seed),
    ]  # fmt: skip


def sweep_filename(preset: PresetId, n: int) -> str:
    return f"sweep_{preset.slug}_{n}.csv"


def write_sweep(records: Sequence[SweepRecord], config: SweepConfig, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for preset in config.presets:
        path = out / sweep_filename(preset, config.n)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SWEEP_COLUMNS)
            for rec in records:
                if rec.preset is preset:
                    writer.writerow(record_row(rec))
        written.append(path)
    meta = out / f"sweep_meta_{config.n}.json"
    meta.write_text(json.dumps(config.metadata(), indent=2, sort_keys=True) + "\n")
    written.append(meta)
    return written


def _parse_vec(text: str) -> list[int]:
    return [int(x) for x in text.split(";")] if text else []


def parse_record(row: dict) -> SweepRecord:
    try:
        preset = PresetId.parse(row["preset"])
        p = float(row["p"])
        plan = plan_from_vectors(_parse_vec(row["r_vec"]), _parse_vec(row["s_vec"]), preset)
        if plan.k != int(row["k"]):
            raise SchemaMismatch(f"k = {row['k']} disagrees with r_vec {row['r_vec']!r}")
        etm_value = float(row["etm"])
        t_min, t_max = int(row["t_min"]), int(row["t_max"])
        if int(row["range"]) != t_max - t_min:
            raise SchemaMismatch(f"range {row['range']} != t_max - t_min")
        return SweepRecord(
            p=p,
            preset=preset,
            plan=plan,
            n=int(row["n"]),
            etm=etm_value,
            ent=float(row["ent"]),
            atm=float(row["atm"]),
            t_min=t_min,
            t_max=t_max,
            rate=float(row["rate"]),
            exp_duration_pm=float(row["exp_duration_pm"]),
            avg_duration_pm=float(row["avg_duration_pm"]),
            m_val=int(row["m_val"]),
            seed=int(row["seed"]),
            usable=(plan.k > 0 and etm_value < 1.0 and not is_degenerate(plan, p)),
        )
    except SchemaMismatch:
        raise
    except (KeyError, ValueError, TypeError, ValidationError) as exc:
        raise SchemaMismatch(f"bad sweep row {row!r}: {exc}") from exc


def read_sweep(paths: Iterable[str | Path]) -> list[SweepRecord]:
    records = []
    for path in expand_inputs(paths):
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != SWEEP_COLUMNS:
                raise SchemaMismatch(f"{path}: header {reader.fieldnames} does not match {list(SWEEP_COLUMNS)}")
            records.extend(parse_record(row) for row in reader)
    return records


def expand_inputs(paths: Iterable[str | Path]) -> list[Path]:
    out = []
    for path in map(Path, paths):
        if path.is_dir():
            out.extend(sorted(path.glob("sweep_*_*.csv")))
        else:
            out.append(path)
    if not out:
        raise SchemaMismatch("no sweep CSV files found")
    return out


def check_record(rec: SweepRecord, tol: float = 1e-9) -> bool:
    """The stored ETM agrees with a fresh evaluation of the stored plan."""
    return abs(etm(rec.plan, PopulationModel(rec.n, rec.p)) - rec.etm) <= tol


def write_report(records: Sequence[SweepRecord], out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, fields in (("mape_tests", ("etm", "atm")), ("mape_duration", ("exp_duration_pm", "avg_duration_pm"))):
        header, rows = table_rows(interval_mape(records, *fields))
        path = out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        paths[name] = path
    path = out / "rate_curves.csv"
    order = {p: i for i, p in enumerate(PresetId)}
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["preset", "n", "p", "rate", "usable"])
        for rec in sorted(records, key=lambda r: (r.n, order[r.preset], r.p)):
            if interval_of(rec.p) == 0:
                writer.writerow([rec.preset.value, rec.n, fmt(rec.p), fmt(rec.rate), int(rec.usable)])
    paths["rate_curves"] = path
    return paths

