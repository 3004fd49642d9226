"""Batch experiments: spec files, seeded runs, metric aggregation and result files."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..algorithms import VARIANTS, RunConfig, run_variant
from ..core import ContractError
from ..immune import OperatorConfig
from ..metrics import mpigd, normalize_objectives, party_hv, rank_sum_test
from ..problems import build_case, default_map, generate_map, shared_sphere
from ..problems.grouped import GroupedMop
from ..problems.uav import CASES, MapParams, UavScenario

log = logging.getLogger(__name__)

SPEC_SCHEMA = "mpia.experiment/1"
RUNS_SCHEMA = "mpia.runs/1"
SUMMARY_SCHEMA = "mpia.summary/1"
KNOWN_METRICS = ("sumHV", "partyHV", "MPIGD")


@dataclass(frozen=True)
class ExperimentSpec:
    problem: dict
    variants: tuple[str, ...] = ("MPIA",)
    runs: int = 30
    base_seed: int = 0
    out: str = "results"
    metrics: tuple[str, ...] = ("sumHV", "partyHV", "MPIGD")
    baseline: str | None = None
    population_size: int = 105
    fe_budget: int | None = None
    fixed_activation_size: int = 20
    operators: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variants", tuple(self.variants))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if self.runs < 1:
            raise ContractError("runs must be at least 1")
        if not self.variants:
            raise ContractError("at least one variant is required")
        for v in self.variants:
            if v not in VARIANTS:
                raise ContractError(f"unknown variant {v!r}; expected one of {sorted(VARIANTS)}")
        for m in self.metrics:
            if m not in KNOWN_METRICS:
                raise ContractError(f"unknown metric {m!r}; expected one of {KNOWN_METRICS}")
        if self.baseline is not None and self.baseline not in self.variants:
            raise ContractError(f"baseline {self.baseline!r} is not among the variants")
        kind = self.problem.get("type")
        if kind not in ("uav", "shared-sphere"):
            raise ContractError(f"unknown problem type {kind!r}; expected 'uav' or 'shared-sphere'")
        if kind == "uav" and int(self.problem.get("case", 0)) not in CASES:
            raise ContractError(f"unknown case {self.problem.get('case')}; expected 1..12")

    @property
    def baseline_variant(self) -> str:
        if self.baseline is not None:
            return self.baseline
        return "MPIA" if "MPIA" in self.variants else self.variants[0]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variants"] = list(self.variants)
        d["metrics"] = list(self.metrics)
        return {"schema": SPEC_SCHEMA, **d}

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        doc = dict(doc)
        schema = doc.pop("schema", SPEC_SCHEMA)
        if schema != SPEC_SCHEMA:
            raise ContractError(f"unsupported experiment schema {schema!r}")
        unknown = set(doc) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ContractError(f"unknown spec fields {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def hash(self) -> str:
        """Digest of everything that affects results (the output directory is excluded)."""
        d = self.to_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def run_config(self, variant: str, seed: int) -> RunConfig:
        return RunConfig(
            population_size=self.population_size,
            fe_budget=self.fe_budget,
            seed=seed,
            variant=variant,
            operators=OperatorConfig(**self.operators),
            fixed_activation_size=self.fixed_activation_size,
        )


def variant_seed(base_seed: int, variant: str, i: int) -> int:
    return int(base_seed) + zlib.crc32(variant.encode()) + int(i)


def build_scenario(problem: dict) -> UavScenario:
    """Scenario for a UAV problem selector: a scenario file, a map seed, or the case's default map."""
    if problem.get("scenario_file"):
        return UavScenario.load(problem["scenario_file"])
    _, _, map_name = CASES[int(problem["case"])]
    grid = int(problem.get("grid", 50))
    if problem.get("map_seed") is not None:
        name = map_name if grid == 50 else f"{map_name}-{grid}"
        return generate_map(int(problem["map_seed"]), MapParams(width=grid, height=grid, name=name))
    return default_map(map_name, grid)


def build_problem(problem: dict):
    kind = problem["type"]
    if kind == "shared-sphere":
        return shared_sphere(
            int(problem.get("d", 20)),
            tuple(problem.get("party_sizes", (2, 2))),
            problem.get("shapes"),
        )
    scenario = build_scenario(problem)
    return build_case(int(problem["case"]), scenario, int(problem.get("n_waypoints", 28)))


@dataclass
class RunRecord:
    variant: str
    run: int
    seed: int
    status: str = "ok"
    error: str = ""
    fe_count: int = 0
    generations: int = 0
    wall_time: float = 0.0
    mps_F: np.ndarray | None = None
    mps_X: np.ndarray | None = None
    mps_cv: np.ndarray | None = None
    metrics: dict = field(default_factory=dict)


def _execute(job: tuple[dict, str, int, int]) -> RunRecord:
    spec_doc, variant, i, seed = job
    spec = ExperimentSpec.from_dict(spec_doc)
    rec = RunRecord(variant=variant, run=i, seed=seed)
    try:
        problem = build_problem(spec.problem)
        res = run_variant(problem, spec.run_config(variant, seed))
    except Exception as exc:  # a failed run is reported, not fatal
        rec.status = "failed"
        rec.error = f"{type(exc).__name__}: {exc}"
        return rec
    rec.fe_count = res.fe_count
    rec.generations = res.generations
    rec.wall_time = res.wall_time
    rec.mps_F = res.mps.F
    rec.mps_X = res.mps.X
    rec.mps_cv = res.mps.cv
    return rec


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    records: list[RunRecord]
    summary: dict
    out_dir: Path | None = None


def _metric_columns(spec: ExperimentSpec, n_parties: int, has_reference: bool) -> list[str]:
    cols = []
    if "sumHV" in spec.metrics:
        cols.append("sumHV")
    if "partyHV" in spec.metrics:
        cols += [f"HV_party{k + 1}" for k in range(n_parties)]
    if "MPIGD" in spec.metrics and has_reference:
        cols.append("MPIGD")
    return cols


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def run_experiment(spec: ExperimentSpec, jobs: int = 1, write: bool = True) -> ExperimentReport:
    """Run every (variant, seed) pair, score the runs, and write ``runs.csv``/``summary.json``/``mps.json``."""
    problem = build_problem(spec.problem)
    scheme = problem.scheme
    work = [
        (spec.to_dict(), v, i, variant_seed(spec.base_seed, v, i)) for v in spec.variants for i in range(spec.runs)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_execute, work))
    else:
        records = [_execute(w) for w in work]
    records.sort(key=lambda r: (r.variant, r.seed))
    for r in records:
        if r.status != "ok":
            log.warning("run %s/%d failed: %s", r.variant, r.run, r.error)

    ok = [r for r in records if r.status == "ok"]
    has_reference = isinstance(problem, GroupedMop) and problem.ps_sampler is not None
    reference = problem.reference_front() if has_reference and "MPIGD" in spec.metrics else None
    norm = None
    if ok and any(len(r.mps_F) for r in ok):
        _, norm = normalize_objectives([r.mps_F for r in ok if len(r.mps_F)])
    for r in ok:
        r.metrics = _score(r, scheme, norm, reference, spec.metrics)

    columns = _metric_columns(spec, scheme.n_parties, reference is not None)
    summary = _summarize(spec, records, columns, norm)
    report = ExperimentReport(spec, records, summary)
    if write:
        out = Path(spec.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "runs.csv").write_text(runs_csv(records, columns, spec.hash()), encoding="utf-8")
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (out / "mps.json").write_text(json.dumps(_mps_doc(records), sort_keys=True) + "\n", encoding="utf-8")
        spec.save(out / "spec.json")
        report.out_dir = out
    return report


def _score(rec: RunRecord, scheme, norm, reference, metrics) -> dict:
    out = {}
    F = rec.mps_F
    if len(F) and norm is not None:
        G = norm.apply(F)
        hvs = [party_hv(G, scheme, k) for k in range(scheme.n_parties)]
    else:
        hvs = [0.0] * scheme.n_parties
    if "sumHV" in metrics:
        out["sumHV"] = float(sum(hvs))
    if "partyHV" in metrics:
        for k, h in enumerate(hvs):
            out[f"HV_party{k + 1}"] = float(h)
    if reference is not None:
        out["MPIGD"] = mpigd(reference, F, scheme) if len(F) else math.inf
    return out


def runs_csv(records: list[RunRecord], columns: list[str], spec_hash: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["schema", "variant", "run", "seed", "spec_hash", "status", "fe_count", "generations", "n_mps"]
    w.writerow(header + columns + ["error", "wall_time"])
    for r in records:
        n_mps = "" if r.mps_F is None else len(r.mps_F)
        row = [RUNS_SCHEMA, r.variant, r.run, r.seed, spec_hash, r.status, r.fe_count, r.generations, n_mps]
        row += [_fmt(r.metrics.get(c)) for c in columns]
        row += [r.error, f"{r.wall_time:.3f}"]
        w.writerow(row)
    return buf.getvalue()


HIGHER_IS_BETTER = {"MPIGD": False}


def _summarize(spec: ExperimentSpec, records, columns, norm) -> dict:
    base = spec.baseline_variant
    by_variant = {v: [r for r in records if r.variant == v] for v in spec.variants}
    values = {
        v: {c: np.array([r.metrics[c] for r in recs if r.status == "ok"], dtype=float) for c in columns}
        for v, recs in by_variant.items()
    }
    variants = {}
    for v, recs in by_variant.items():
        entry = {
            "n_ok": sum(r.status == "ok" for r in recs),
            "n_failed": sum(r.status != "ok" for r in recs),
            "failed_seeds": [r.seed for r in recs if r.status != "ok"],
            "metrics": {},
        }
        for c in columns:
            x = values[v][c]
            entry["metrics"][c] = {
                "mean": float(x.mean()) if len(x) else None,
                "std": float(x.std(ddof=1)) if len(x) > 1 else (0.0 if len(x) else None),
                "median": float(np.median(x)) if len(x) else None,
            }
            if v != base:
                entry["metrics"][c]["vs_baseline"] = _compare(x, values[base][c], c)
        variants[v] = entry
    return {
        "schema": SUMMARY_SCHEMA,
        "spec_hash": spec.hash(),
        "baseline": base,
        "metric_columns": columns,
        "normalization": None if norm is None else norm.to_dict(),
        "variants": variants,
    }


def _compare(x, baseline, column) -> dict:
    """Label ``x`` against the baseline sample: '+' better, '-' worse, '≈' similar."""
    if len(x) < 5 or len(baseline) < 5:
        return {"label": "n/a", "symbol": "", "p_value": None}
    finite = np.isfinite(x).all() and np.isfinite(baseline).all()
    if not finite:
        return {"label": "n/a", "symbol": "", "p_value": None}
    res = rank_sum_test(x, baseline, higher_is_better=HIGHER_IS_BETTER.get(column, True))
    return {"label": res.label, "symbol": res.symbol, "p_value": res.p_value}


def _mps_doc(records) -> dict:
    doc: dict = {}
    for r in records:
        if r.status != "ok":
            continue
        doc.setdefault(r.variant, {})[str(r.seed)] = {
            "run": r.run,
            "F": r.mps_F.tolist(),
            "X": r.mps_X.tolist(),
        }
    return doc


def load_runs(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def override(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    """Copy of ``spec`` with the non-None keyword values replaced (CLI overrides)."""
    changes = {k: v for k, v in kw.items() if v is not None}
    if "case" in changes:
        case = changes.pop("case")
        changes["problem"] = {**spec.problem, "type": "uav", "case": int(case)}
    return replace(spec, **changes)
