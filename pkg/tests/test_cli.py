import csv
import json
from pathlib import Path

from pytest import fixture, mark

from csgrav.config import SOLVER_TOL
from csgrav.main import DEFAULT_THREADS, EXIT_FAIL, EXIT_INVALID, EXIT_PASS, build_parser, main
from csgrav.schemas import RunSpec, SolverSpec

SPECS = Path(__file__).resolve().parents[1] / "seed" / "specs"


@fixture
def write_spec(tmp_path):
    def write(name, payload):
        path = tmp_path / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
        return str(path)

    return write


CORRESPOND = {
    "command": "correspond",
    "seed": 3,
    "chart": {"dim": 3},
    "field_spec": {"name": "trig-random", "max_frequency": 1, "sections": 2, "samples": 10},
}

EXTREMIZE = {
    "command": "extremize",
    "seed": 5,
    "chart": {"dim": 3},
    "field_spec": {"name": "perturbed-flat", "magnitude": 0.01},
    "grid": [5, 5, 5],
    "solver": {"max_iters": 10, "tol": 1e-30, "stationarity_dirs": 1},
}


def _error_of(capsys):
    payload = json.loads(capsys.readouterr().out)
    assert payload["ok"] is False
    return payload


# successful runs

def test_correspond_passes(write_spec, tmp_path):
    out = tmp_path / "report.json"
    code = main(["correspond", "--spec", write_spec("c.json", CORRESPOND), "--out", str(out), "--quiet"])
    assert code == EXIT_PASS
    report = json.loads(out.read_text())
    assert report["ok"] is True
    assert report["command"] == "correspond"
    assert "wall_time" not in report
    assert abs(report["results"]["ratio_mean"] + 2.0) <= 1e-9
    assert {c["name"] for c in report["checks"]} == {
        "correspondence_pointwise", "correspondence", "ratio_spread",
    }
    assert all(c["status"] == "PASS" for c in report["checks"])
    assert len(report["environment"]["build_hash"]) == 64


def test_report_independent_of_threads(write_spec, tmp_path):
    spec = write_spec("c.json", CORRESPOND)
    one, four = tmp_path / "one.json", tmp_path / "four.json"
    assert main(["correspond", "--spec", spec, "--out", str(one), "--threads", "1", "--quiet"]) == EXIT_PASS
    assert main(["correspond", "--spec", spec, "--out", str(four), "--threads", "4", "--quiet"]) == EXIT_PASS
    assert one.read_text() == four.read_text()


def test_timing_and_seed_override(write_spec, tmp_path):
    out = tmp_path / "report.json"
    spec = write_spec("c.json", CORRESPOND)
    main(["correspond", "--spec", spec, "--out", str(out), "--seed", "11", "--timing", "--quiet"])
    report = json.loads(out.read_text())
    assert report["spec"]["seed"] == 11
    assert report["wall_time"] >= 0.0


def test_report_goes_to_stdout(write_spec, capsys):
    assert main(["correspond", "--spec", write_spec("c.json", CORRESPOND), "--quiet"]) == EXIT_PASS
    assert json.loads(capsys.readouterr().out)["ok"] is True


def test_flat_verify_passes(write_spec, tmp_path):
    spec = {"command": "verify", "seed": 7, "chart": {"dim": 3},
            "field_spec": {"name": "flat", "max_frequency": 1, "samples": 10}}
    out = tmp_path / "verify.json"
    assert main(["verify", "--spec", write_spec("v.json", spec), "--out", str(out), "--quiet"]) == EXIT_PASS
    names = [c["name"] for c in json.loads(out.read_text())["checks"]]
    assert names[:3] == ["projector", "k_invariance", "gram_gl"]
    assert "palatini_normalization" in names


def test_trig_random_verify_passes(write_spec, tmp_path):
    spec = {"command": "verify", "seed": 7, "chart": {"dim": 3},
            "field_spec": {"name": "trig-random", "max_frequency": 1, "samples": 10}}
    out = tmp_path / "verify.json"
    assert main(["verify", "--spec", write_spec("v.json", spec), "--out", str(out), "--quiet"]) == EXIT_PASS
    checks = json.loads(out.read_text())["checks"]
    assert all(c["status"] == "PASS" for c in checks)
    names = {c["name"] for c in checks}
    assert {"gauge_defect_integral", "action_gauge_invariance", "bianchi"} <= names


def test_chern_passes(write_spec, tmp_path):
    spec = {"command": "chern", "seed": 4, "chart": {"dim": 4},
            "field_spec": {"name": "trig-random", "max_frequency": 1, "samples": 10}}
    out = tmp_path / "chern.json"
    assert main(["chern", "--spec", write_spec("ch.json", spec), "--out", str(out), "--quiet"]) == EXIT_PASS
    report = json.loads(out.read_text())
    assert [c["name"] for c in report["checks"]] == [
        "chern_weil_gl3", "chern_weil_integral_gl3",
        "chern_weil_aff3", "chern_weil_integral_aff3",
        "chern_weil_abelian",
    ]
    assert all(c["status"] == "PASS" for c in report["checks"])
    assert report["results"]["grid"] == [5, 5, 5, 5]


@mark.slow
@mark.parametrize("name", ["verify_default.json", "chern.json", "extremize.json"])
def test_shipped_specs_pass(name, tmp_path):
    out = tmp_path / "report.json"
    command = name.split("_")[0].split(".")[0]
    assert main([command, "--spec", str(SPECS / name), "--out", str(out), "--quiet"]) == EXIT_PASS
    assert json.loads(out.read_text())["ok"] is True


def test_shipped_extremize_spec_uses_reachable_tolerance():
    spec = RunSpec.model_validate_json((SPECS / "extremize.json").read_text())
    assert spec.solver.tol == SOLVER_TOL == SolverSpec().tol
    assert spec.solver.max_iters == 500


# failing runs

def test_contaminated_correspond_fails(write_spec, tmp_path):
    spec = dict(CORRESPOND, field_spec=dict(CORRESPOND["field_spec"], p_contamination=0.05))
    out = tmp_path / "report.json"
    assert main(["correspond", "--spec", write_spec("c.json", spec), "--out", str(out), "--quiet"]) == EXIT_FAIL
    report = json.loads(out.read_text())
    assert report["ok"] is False
    assert report["results"]["rejected"] == 2
    assert [c["status"] for c in report["checks"]] == ["FAIL", "FAIL"]


def test_extremize_with_unreachable_tolerance(write_spec, tmp_path):
    out, history = tmp_path / "report.json", tmp_path / "history.csv"
    code = main([
        "extremize", "--spec", write_spec("e.json", EXTREMIZE),
        "--out", str(out), "--csv", str(history), "--quiet",
    ])
    assert code == EXIT_FAIL
    report = json.loads(out.read_text())
    failed = {c["name"] for c in report["checks"] if c["status"] == "FAIL"}
    assert "solver_converged" in failed
    with history.open() as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["iter", "objective", "step", "action_pg", "action_cs"]
    assert len(rows) == report["results"]["iterations"] + 2
    assert rows[1][0] == "0"


@mark.slow
def test_zero_tolerance_fails(write_spec):
    spec = {"command": "verify", "chart": {"dim": 3},
            "field_spec": {"name": "trig-random", "max_frequency": 1, "samples": 10},
            "tolerances": {"bianchi": 0.0, "leibniz": 0.0}}
    assert main(["verify", "--spec", write_spec("v.json", spec), "--quiet"]) == EXIT_FAIL


# invalid input

@mark.parametrize("payload", [
    "{not json",
    "[1, 2, 3]",
    {"command": "correspond", "chart": {"dim": 4}},
    {"command": "correspond", "tolerances": {"correspondence": -1.0}},
    {"command": "correspond", "tolerances": {"no_such_check": 1.0}},
    {"command": "correspond", "colour": "blue"},
    {"command": "chern"},
    {"command": "correspond", "signature": [1, 1]},
    {"command": "correspond", "grid": [5, 5]},
])
def test_invalid_specs(write_spec, capsys, payload):
    assert main(["correspond", "--spec", write_spec("bad.json", payload), "--quiet"]) == EXIT_INVALID
    assert _error_of(capsys)["error"] == "invalid_spec"


def test_extremize_needs_solver(write_spec, capsys):
    spec = {k: v for k, v in EXTREMIZE.items() if k != "solver"}
    assert main(["extremize", "--spec", write_spec("e.json", spec), "--quiet"]) == EXIT_INVALID
    assert "solver" in _error_of(capsys)["detail"]


def test_missing_spec_file(tmp_path, capsys):
    assert main(["verify", "--spec", str(tmp_path / "absent.json"), "--quiet"]) == EXIT_INVALID
    assert _error_of(capsys)["error"] == "invalid_spec"


def test_threads_must_be_positive(capsys):
    assert main(["verify", "--threads", "0", "--quiet"]) == EXIT_INVALID
    assert _error_of(capsys)["error"] == "invalid_input"


def test_threads_default_to_available_cpus():
    assert 1 <= DEFAULT_THREADS <= 8
    assert build_parser().parse_args(["correspond"]).threads == DEFAULT_THREADS


# schemas

def test_schema_command_writes_both_schemas(tmp_path):
    assert main(["schema", "--out", str(tmp_path), "--quiet"]) == EXIT_PASS
    run_spec = json.loads((tmp_path / "run_spec.schema.json").read_text())
    report = json.loads((tmp_path / "report.schema.json").read_text())
    assert "command" in run_spec["properties"]
    assert "checks" in report["properties"]
