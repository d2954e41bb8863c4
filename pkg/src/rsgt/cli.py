"""Command-line front end.

Exit codes: 0 success, 2 validation error, 3 budget or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from rsgt.analytic import (
    DurationWeights,
    PopulationModel,
    binary_entropy,
    counting_bound,
    etm,
    expected_duration,
    expected_tests,
    rate,
)
from rsgt.design import INDIVIDUAL, PresetId, instantiate_preset, parse_plan
from rsgt.errors import ResourceError, ValidationError
from rsgt.experiment import SweepConfig, read_sweep, run_sweep, write_report, write_sweep
from rsgt.metrics import interval_mape
from rsgt.optimizer import OptimizationSpec, feasibility_threshold, optimize
from rsgt.simulator import generate_population, load_fixture, run_trial, run_trial_with_assignment

EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE = 0, 2, 3


def _weights(text: str | None) -> DurationWeights | None:
    if not text:
        return None
    try:
        return DurationWeights(tuple(float(x) for x in text.split(",")))
    except ValueError as exc:
        raise ValidationError(f"bad weights {text!r}: {exc}") from exc


def _int_list(text: str | None) -> list[int] | None:
    if not text:
        return None
    try:
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise ValidationError(f"bad integer list {text!r}") from exc


def _emit(record: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(record, indent=2))
        return
    for key, value in record.items():
        if isinstance(value, float):
            value = f"{value:.9g}"
        print(f"{key}: {value}")


def _resolve_plan(args, model: PopulationModel):
    if args.plan:
        return parse_plan(args.plan), None
    preset = PresetId.parse(args.preset)
    if preset is PresetId.INDIVIDUAL:
        return INDIVIDUAL, None
    sizes = _int_list(args.sizes)
    if sizes is not None:
        return instantiate_preset(preset, sizes, args.r), None
    spec = OptimizationSpec(preset=preset, s_max=args.s_max, r_max=args.r_max)
    result = optimize(spec, model)
    return result.plan, result


def cmd_evaluate(args) -> int:
    model = PopulationModel(args.n, args.p)
    plan, result = _resolve_plan(args, model)
    weights = _weights(args.weights)
    record = {
        "plan": plan.shorthand(),
        "k": plan.k,
        "r": list(plan.r_vec),
        "s": list(plan.s_vec),
        "etm": etm(plan, model),
        "ent": expected_tests(plan, model),
        "expected_duration": expected_duration(plan, model, weights),
        "expected_duration_pm": expected_duration(plan, model, weights) / model.n,
        "entropy": binary_entropy(model.p),
        "counting_bound": counting_bound(model),
        "rate": rate(plan, model),
    }
    if result is not None:
        record["feasible"] = result.feasible
        if result.candidate is not None and not result.feasible:
            record["best_pooled_plan"] = result.candidate.shorthand()
            record["best_pooled_etm"] = result.candidate_etm
    _emit(record, args.json)
    return EXIT_OK


def _sweep_config(args) -> SweepConfig:
    overrides = {
        "n": args.n,
        "p_start": args.p_start,
        "p_end": args.p_end,
        "p_step": args.p_step,
        "m_val": args.m_val,
        "base_seed": args.seed,
        "s_max": args.s_max,
        "r_max": args.r_max,
        "workers": args.workers,
    }
    if args.presets:
        overrides["presets"] = "all" if args.presets == "all" else args.presets.split(",")
    if args.config:
        return SweepConfig.from_file(args.config, **overrides)
    if args.n is None:
        raise ValidationError("sweep needs --n or a config file")
    return SweepConfig.from_mapping({k: v for k, v in overrides.items() if v is not None})


def cmd_sweep(args) -> int:
    config = _sweep_config(args)
    records = run_sweep(config)
    for path in write_sweep(records, config, args.out):
        print(path)
    return EXIT_OK


def cmd_report(args) -> int:
    records = read_sweep(args.inputs)
    out = args.out or (args.inputs[0] if Path(args.inputs[0]).is_dir() else Path(args.inputs[0]).parent)
    paths = write_report(records, out)
    for path in paths.values():
        print(path)
    if args.verbose:
        table = interval_mape(records)
        worst = max((v for v in table.values() if v is not None), default=None)
        print(f"max tests MAPE: {worst if worst is None else f'{worst:.4g}%'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    weights = _weights(args.weights)
    if args.fixture:
        fixture = load_fixture(args.fixture)
        plan = fixture["plan"]
        weights = weights or fixture["weights"]
        outcome = run_trial_with_assignment(plan, fixture["population"], fixture["assignments"], weights)
    else:
        if args.n is None or args.p is None:
            raise ValidationError("simulate needs --fixture or both --n and --p")
        model = PopulationModel(args.n, args.p)
        if args.plan:
            plan = parse_plan(args.plan)
        else:
            plan, _ = _resolve_plan(args, model)
        population = generate_population(args.n, args.p, args.seed)
        outcome = run_trial(plan, population, weights, seed=args.seed + 1)
    record = {"plan": plan.shorthand(), **outcome.summary()}
    _emit(record, args.json)
    return EXIT_OK


def cmd_threshold(args) -> int:
    preset = PresetId.parse(args.preset)
    spec = None if preset is PresetId.INDIVIDUAL else OptimizationSpec(preset=preset, s_max=args.s_max, r_max=args.r_max)
    value = feasibility_threshold(preset, spec, args.p_step, n=args.n)
    _emit({"preset": preset.value, "threshold": value}, args.json)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsgt", description="Multi-stage (r,s)-regular design group testing")
    sub = parser.add_subparsers(dest="command", required=True)

    def plan_args(p, required=True):
        g = p.add_mutually_exclusive_group(required=required)
        g.add_argument("--plan", help="stage shorthand such as 2x5,1x3")
        g.add_argument("--preset", help="preset id such as sp-two, dp-three, individual")
        p.add_argument("--sizes", help="comma-separated group sizes for --preset (otherwise optimised)")
        p.add_argument("--r", type=int, help="stage-1 joint tests for rp-two with --sizes")
        p.add_argument("--s-max", type=int, help="group-size search bound")
        p.add_argument("--r-max", type=int, default=10, help="joint-test search bound for rp-two")

    p = sub.add_parser("evaluate", help="expected tests, duration and rate of a plan")
    plan_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--weights", help="comma-separated time units per stage, final stage included")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="optimise and simulate every preset over a probability grid")
    p.add_argument("--config", help="JSON config; flags override its values")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int)
    p.add_argument("--p-start", type=float)
    p.add_argument("--p-end", type=float)
    p.add_argument("--p-step", type=float)
    p.add_argument("--m-val", type=int)
    p.add_argument("--presets", help="comma-separated preset ids, or 'all'")
    p.add_argument("--seed", type=int)
    p.add_argument("--s-max", type=int)
    p.add_argument("--r-max", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="MAPE tables and rate curves from sweep CSVs")
    p.add_argument("inputs", nargs="+", help="sweep CSV files or directories holding them")
    p.add_argument("--out", help="output directory (default: next to the inputs)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate", help="run one trial, seeded or from a fixture file")
    plan_args(p, required=False)
    p.add_argument("--fixture", help="JSON fixture with population and pooling orders")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("threshold", help="largest grid p where a preset's optimum stays usable")
    p.add_argument("--preset", required=True)
    p.add_argument("--p-step", type=float, default=0.001)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--s-max", type=int)
    p.add_argument("--r-max", type=int, default=10)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_threshold)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ResourceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
