"""Command-line entry point: ``mpia generate-map | run | report | plot``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..core import ContractError
from ..problems.uav import MAP_SEEDS, MapParams, UavProblem, default_map, generate_map
from .experiment import ExperimentSpec, build_problem, load_runs, override, run_experiment
from .plots import emit_front_plot, emit_path_plot

log = logging.getLogger("mpia")


def _variants(text: str | None):
    if text is None:
        return None
    return tuple(v.strip() for v in text.split(",") if v.strip())


def cmd_generate_map(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.seed is None:
        scenarios = [default_map(name, args.grid) for name in MAP_SEEDS]
    else:
        name = args.name or f"map-{args.seed}"
        scenarios = [generate_map(args.seed, MapParams(width=args.grid, height=args.grid, name=name))]
    for s in scenarios:
        target = out / f"{s.name}.map"
        s.save(target)
        print(f"{target}  sha256={s.checksum()}")
    return 0


def _load_spec(args) -> ExperimentSpec:
    if args.spec:
        spec = ExperimentSpec.load(args.spec)
    elif args.case is not None:
        spec = ExperimentSpec(problem={"type": "uav", "case": args.case})
    else:
        raise ContractError("either --spec or --case is required")
    return override(
        spec,
        out=args.out,
        case=args.case if args.spec else None,
        variants=_variants(args.variant),
        runs=args.runs,
        base_seed=args.seed,
    )


def cmd_run(args) -> int:
    spec = _load_spec(args)
    report = run_experiment(spec, jobs=args.jobs)
    failed = sum(r.status != "ok" for r in report.records)
    print(f"{len(report.records)} runs written to {report.out_dir} ({failed} failed)")
    _print_summary(report.summary)
    return 1 if failed == len(report.records) else 0


def _print_summary(summary: dict) -> None:
    cols = summary["metric_columns"]
    print("variant".ljust(12) + "".join(c.rjust(26) for c in cols))
    for v, entry in summary["variants"].items():
        cells = []
        for c in cols:
            m = entry["metrics"][c]
            if m["mean"] is None:
                cells.append("-".rjust(26))
                continue
            sym = m.get("vs_baseline", {}).get("symbol", "")
            cells.append(f"{m['mean']:.4e}({m['std']:.2e}){sym}".rjust(26))
        print(v.ljust(12) + "".join(cells))
    print(f"baseline: {summary['baseline']}")


def cmd_report(args) -> int:
    out = Path(args.out)
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    rows = load_runs(out / "runs.csv")
    print(f"{len(rows)} runs, spec {summary['spec_hash']}")
    _print_summary(summary)
    return 0


def cmd_plot(args) -> int:
    out = Path(args.out)
    spec = ExperimentSpec.load(args.spec or out / "spec.json")
    problem = build_problem(spec.problem)
    mps = json.loads((out / "mps.json").read_text(encoding="utf-8"))
    written = []
    for variant in sorted(mps):
        by_seed = mps[variant]
        first = min(by_seed, key=lambda s: by_seed[s]["run"])
        F = np.asarray(by_seed[first]["F"], dtype=float)
        X = np.asarray(by_seed[first]["X"], dtype=float)
        label = f"{variant} seed {first}"
        written.append(emit_front_plot(F, problem.scheme, out / f"front_{variant}.svg", problem.objective_names, label))
        if isinstance(problem, UavProblem):
            paths = [problem.decode(x) for x in X]
            written.append(emit_path_plot(paths, problem.scenario, out / f"paths_{variant}.svg", label))
    for p in written:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpia", description="Multiparty immune algorithm experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-map", help="write scenario files")
    g.add_argument("--out", default="maps")
    g.add_argument("--seed", type=int, default=None, help="custom seed; default writes MAP-A and MAP-B")
    g.add_argument("--grid", type=int, default=50)
    g.add_argument("--name", default=None)
    g.set_defaults(func=cmd_generate_map)

    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("--spec")
    r.add_argument("--out")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--case", type=int, choices=range(1, 13), metavar="{1..12}")
    r.add_argument("--variant", help="comma-separated variant names")
    r.add_argument("--runs", type=int)
    r.add_argument("--seed", type=int, help="base seed")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="print the summary of a finished experiment")
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", help="write SVG plots for a finished experiment")
    p.add_argument("--out", required=True)
    p.add_argument("--spec")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ContractError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
