import csv
import io
import json
import os
import re
from pathlib import Path

import numpy as np
import pytest

import mpia.harness.experiment as experiment
from mpia.core import ContractError, PartyScheme
from mpia.harness import ExperimentSpec, run_experiment
from mpia.harness.cli import main
from mpia.harness.experiment import RUNS_SCHEMA, load_runs, override, variant_seed
from mpia.harness.plots import emit_front_plot, emit_path_plot, front_svg, path_svg
from mpia.problems import build_case, default_map, generate_map
from mpia.problems.uav import MapParams, straight_path

GOLDEN = Path(__file__).parent / "golden"
REGEN = os.environ.get("MPIA_REGEN_GOLDEN") == "1"
BI = PartyScheme([(0, 1), (2, 3)])

TOY = {
    "problem": {"type": "shared-sphere", "d": 6, "party_sizes": [2, 2], "shapes": ["sphere", "linear"]},
    "population_size": 20,
    "fe_budget": 300,
    "operators": {"activate_sizes": [5, 10, 15, 20]},
}


def toy_spec(tmp_path, **kw):
    return ExperimentSpec.from_dict({**TOY, "out": str(tmp_path / "out"), **kw})


def metric_part(text):
    rows = list(csv.reader(io.StringIO(text)))
    return [r[:-1] for r in rows]  # wall_time is the last column


def check_golden(name, text):
    path = GOLDEN / name
    if REGEN:
        GOLDEN.mkdir(exist_ok=True)
        path.write_text(text, encoding="utf-8")
    assert path.read_text(encoding="utf-8") == text


# -- spec --------------------------------------------------------------------


def test_spec_roundtrip_and_validation(tmp_path):
    spec = toy_spec(tmp_path, variants=["MPIA", "MPIA-BASE"], runs=3)
    spec.save(tmp_path / "s.json")
    back = ExperimentSpec.load(tmp_path / "s.json")
    assert back == spec and back.hash() == spec.hash()
    assert override(spec, out="elsewhere").hash() == spec.hash()
    assert override(spec, runs=7).hash() != spec.hash()
    assert spec.baseline_variant == "MPIA"
    assert ExperimentSpec(problem=TOY["problem"], variants=["MPIA-B", "MPIA-A"]).baseline_variant == "MPIA-B"
    for bad in (
        {"runs": 0},
        {"variants": []},
        {"variants": ["X"]},
        {"metrics": ["IGD"]},
        {"baseline": "MPIA-A"},
        {"problem": {"type": "zdt"}},
        {"problem": {"type": "uav", "case": 13}},
        {"schema": "mpia.experiment/0"},
        {"colour": "red"},
    ):
        with pytest.raises(ContractError):
            ExperimentSpec.from_dict({**TOY, **bad})


def test_override_case_switches_problem():
    spec = override(ExperimentSpec(problem=TOY["problem"]), case=4, runs=2)
    assert spec.problem["type"] == "uav" and spec.problem["case"] == 4 and spec.runs == 2


def test_variant_seed_is_stable():
    assert variant_seed(0, "MPIA", 0) == 82244614  # crc32("MPIA")
    assert variant_seed(10, "MPIA", 2) == variant_seed(0, "MPIA", 0) + 12
    assert variant_seed(0, "MPIA", 0) != variant_seed(0, "MPIA-A", 0)


# -- run_experiment ------------------------------------------------------------


def test_single_run_single_record(tmp_path):
    report = run_experiment(toy_spec(tmp_path, runs=1))
    assert len(report.records) == 1
    rec = report.records[0]
    assert rec.status == "ok" and rec.fe_count == 300 and rec.seed == variant_seed(0, "MPIA", 0)
    out = tmp_path / "out"
    assert {p.name for p in out.iterdir()} == {"runs.csv", "summary.json", "mps.json", "spec.json"}
    rows = load_runs(out / "runs.csv")
    assert len(rows) == 1 and rows[0]["schema"] == RUNS_SCHEMA
    assert list(rows[0])[-1] == "wall_time"
    for c in ("sumHV", "HV_party1", "HV_party2", "MPIGD"):
        assert np.isfinite(float(rows[0][c]))


def test_rerun_reproduces_csv_apart_from_wall_time(tmp_path):
    spec = toy_spec(tmp_path, variants=["MPIA", "MPIA-BASE"], runs=2)
    csv_path = tmp_path / "out" / "runs.csv"
    run_experiment(spec)
    first = csv_path.read_text()
    run_experiment(spec)
    second = csv_path.read_text()
    assert metric_part(first) == metric_part(second)
    assert run_experiment(spec, write=False).summary["spec_hash"] == spec.hash()


def test_parallel_matches_serial(tmp_path):
    spec = toy_spec(tmp_path, variants=["MPIA", "MPIA-B"], runs=2)
    a = experiment.runs_csv(run_experiment(spec, write=False).records, ["sumHV"], "h")
    b = experiment.runs_csv(run_experiment(spec, jobs=2, write=False).records, ["sumHV"], "h")
    assert metric_part(a) == metric_part(b)


def test_summary_matches_recomputation(tmp_path):
    spec = toy_spec(tmp_path, variants=["MPIA", "MPIA-BASE"], runs=5)
    report = run_experiment(spec)
    rows = load_runs(tmp_path / "out" / "runs.csv")
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    for v in spec.variants:
        for c in summary["metric_columns"]:
            x = np.array([float(r[c]) for r in rows if r["variant"] == v])
            m = summary["variants"][v]["metrics"][c]
            assert m["mean"] == pytest.approx(x.mean(), rel=1e-12)
            assert m["std"] == pytest.approx(x.std(ddof=1), rel=1e-12, abs=1e-15)
            assert m["median"] == pytest.approx(np.median(x), rel=1e-12)
    cmp = summary["variants"]["MPIA-BASE"]["metrics"]["sumHV"]["vs_baseline"]
    assert cmp["label"] in ("better", "worse", "similar") and 0 <= cmp["p_value"] <= 1
    assert "vs_baseline" not in summary["variants"]["MPIA"]["metrics"]["sumHV"]
    # normalization bounds are the extremes of the union of every variant's MPS
    merged = np.vstack([r.mps_F for r in report.records if len(r.mps_F)])
    norm = summary["normalization"]
    assert norm["lower"] == merged.min(axis=0).tolist() and norm["upper"] == merged.max(axis=0).tolist()
    mps = json.loads((tmp_path / "out" / "mps.json").read_text())
    assert sum(len(s["F"]) for by in mps.values() for s in by.values()) == len(merged)


def test_failures_are_marked(tmp_path, monkeypatch):
    original = experiment.run_variant
    bad = variant_seed(0, "MPIA", 1)

    def flaky(problem, config):
        if config.seed == bad:
            raise RuntimeError("boom")
        return original(problem, config)

    monkeypatch.setattr(experiment, "run_variant", flaky)
    report = run_experiment(toy_spec(tmp_path, runs=3))
    status = {r.seed: r.status for r in report.records}
    assert status[bad] == "failed" and sum(s == "ok" for s in status.values()) == 2
    entry = report.summary["variants"]["MPIA"]
    assert entry["n_failed"] == 1 and entry["failed_seeds"] == [bad] and entry["n_ok"] == 2
    rows = {r["seed"]: r for r in load_runs(tmp_path / "out" / "runs.csv")}
    assert rows[str(bad)]["status"] == "failed" and "boom" in rows[str(bad)]["error"]
    assert rows[str(bad)]["sumHV"] == ""


def test_uav_experiment_smoke(tmp_path):
    spec = ExperimentSpec.from_dict({
        "problem": {"type": "uav", "case": 1, "grid": 25},
        "runs": 1,
        "population_size": 20,
        "fe_budget": 60,
        "operators": {"activate_sizes": [5, 10, 20]},
        "out": str(tmp_path / "uav"),
    })
    report = run_experiment(spec)
    assert report.records[0].status == "ok"
    assert report.summary["metric_columns"] == ["sumHV", "HV_party1", "HV_party2"]  # no MPIGD without a known front


# -- plots ---------------------------------------------------------------------


def test_front_plot_empty_and_single_point(tmp_path):
    empty = front_svg(np.empty((0, 4)), BI)
    assert empty.startswith("<svg") and empty.rstrip().endswith("</svg>")
    assert empty.count('class="panel"') == 2 and "<circle" not in empty
    one = front_svg([[0.1, 0.2, 0.3, 0.4]], BI, names=["a", "b", "c", "d"])
    for panel in re.findall(r'<g class="panel".*?</g>', one, flags=re.S):
        assert panel.count("<circle") == 1
    assert all(f">{n}</text>" in one for n in "abcd")
    path = emit_front_plot([[0.1, 0.2, 0.3, 0.4]], BI, tmp_path / "f.svg")
    assert path.read_text() == front_svg([[0.1, 0.2, 0.3, 0.4]], BI)


def test_front_plot_pairwise_projection():
    scheme = PartyScheme([(0, 1, 2), (3,)])
    svg = front_svg(np.random.default_rng(0).random((4, 4)), scheme)
    assert svg.count('data-party="1"') == 3 and svg.count('data-party="2"') == 1


def test_front_plot_golden():
    rng = np.random.default_rng(2024)
    F = rng.random((6, 4)).round(3)
    check_golden("front_toy.svg", front_svg(F, BI, names=["f1", "f2", "g1", "g2"], title="toy record"))


def test_path_plot_straight_line_and_hover_points():
    scenario = default_map("MAP-A")
    problem = build_case(1, scenario)
    svg = path_svg([problem.decode(straight_path(scenario))], scenario)
    lines = re.findall(r'<polyline points="([^"]+)"', svg)
    assert len(lines) == 1
    pts = lines[0].split()
    # grid (1, 1) and (45, 45) on a 50-cell map at 10 px per cell, y axis up
    assert pts[0] == "30.00,526.00" and pts[-1] == "470.00,86.00"
    hover = re.findall(r'data-x="([^"]+)" data-y="([^"]+)"', svg)
    assert hover == [("25", "30"), ("34", "20"), ("40", "35")]


def test_path_plot_golden(tmp_path):
    scenario = generate_map(7, MapParams(width=12, height=12, name="golden-12"))
    problem = build_case(1, scenario, n_waypoints=4)
    paths = [problem.decode(straight_path(scenario, 4)), problem.decode(straight_path(scenario, 4, 60.0) + 0.5)]
    text = path_svg(paths, scenario, title="golden scenario")
    check_golden("paths_toy.svg", text)
    assert emit_path_plot(paths, scenario, tmp_path / "p.svg", title="golden scenario").read_text() == text


# -- CLI -----------------------------------------------------------------------


def test_cli_verbs(tmp_path, capsys):
    assert main(["generate-map", "--out", str(tmp_path / "maps"), "--grid", "25"]) == 0
    printed = capsys.readouterr().out
    assert "MAP-A-25.map" in printed and "MAP-B-25.map" in printed
    assert main(["generate-map", "--out", str(tmp_path / "maps"), "--seed", "5", "--grid", "10", "--name", "x"]) == 0
    assert (tmp_path / "maps" / "x.map").exists()

    spec_file = tmp_path / "spec.json"
    toy_spec(tmp_path).save(spec_file)
    out = tmp_path / "cli"
    assert main(["run", "--spec", str(spec_file), "--out", str(out), "--runs", "2", "--variant", "MPIA,MPIA-B"]) == 0
    assert len(load_runs(out / "runs.csv")) == 4
    capsys.readouterr()
    assert main(["report", "--out", str(out)]) == 0
    assert "4 runs" in capsys.readouterr().out
    assert main(["plot", "--out", str(out)]) == 0
    assert (out / "front_MPIA.svg").exists() and (out / "front_MPIA-B.svg").exists()

    assert main(["run", "--out", str(out)]) == 2  # neither --spec nor --case
    assert main(["report", "--out", str(tmp_path / "missing")]) == 2


def test_cli_uav_plot(tmp_path):
    spec_file = tmp_path / "uav.json"
    ExperimentSpec.from_dict({
        "problem": {"type": "uav", "case": 1, "grid": 25},
        "runs": 1,
        "population_size": 20,
        "fe_budget": 200,
        "operators": {"activate_sizes": [5, 10, 20]},
    }).save(spec_file)
    out = tmp_path / "uavout"
    assert main(["run", "--spec", str(spec_file), "--out", str(out)]) == 0
    assert main(["plot", "--out", str(out)]) == 0
    (mps,) = json.loads((out / "mps.json").read_text())["MPIA"].values()
    assert len(mps["X"]) >= 1
    assert (out / "paths_MPIA.svg").read_text().count("<polyline") == len(mps["X"])
