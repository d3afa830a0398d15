import csv
import json

import pytest

from hitchin_bvp.main import build_parser, execute
from hitchin_bvp.mods import selftest
from hitchin_bvp.utils.fields import load_field

from .conftest import FLAT_LITERAL


def run(tmp_path, *argv):
    return execute(["-q", "--out-dir", str(tmp_path), *argv])


def read(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_analyze_flat_literal(tmp_path):
    assert run(tmp_path, "analyze", json.dumps(FLAT_LITERAL)) == 0
    report = read(tmp_path / "analyze.json")
    assert report["schema"] == "hitchin-bvp/report"
    assert report["subcommand"] == "analyze"
    assert report["stable"] is True
    assert report["exact"] is True
    assert report["lambda"] == -4
    assert report["vol_density"] == 2
    assert report["P_coeffs"] == {"1 2 3": 1, "1 5 6": -1, "2 4 6": 1, "3 4 5": -1}


def test_analyze_reads_a_file(tmp_path):
    path = tmp_path / "psi.json"
    path.write_text(json.dumps(FLAT_LITERAL), encoding="utf-8")
    assert run(tmp_path, "analyze", f"@{path}", "--out", str(tmp_path / "from-file.json")) == 0
    assert read(tmp_path / "from-file.json")["lambda"] == -4


def test_analyze_unstable_form_is_not_an_error(tmp_path):
    assert run(tmp_path, "analyze", '{"grade": 3, "coeffs": {"1 2 3": 1}}') == 0
    report = read(tmp_path / "analyze.json")
    assert report["stable"] is False
    assert report["vol_density"] == 0


@pytest.mark.parametrize("literal", ["{not json", '{"grade": 2, "coeffs": {"1 2": 1}}', '{"grade": 3, "coeffs": {"3 1 2": 1}}'])
def test_analyze_rejects_bad_literals(tmp_path, literal):
    assert run(tmp_path, "analyze", literal) == 1
    assert not (tmp_path / "analyze.json").exists()


def test_unwritable_report_path_fails(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    out = blocker / "sub" / "report.json"
    assert run(tmp_path, "analyze", json.dumps(FLAT_LITERAL), "--out", str(out)) == 1
    assert not out.exists()


def test_out_of_range_parameters_are_config_errors(tmp_path):
    assert run(tmp_path, "spectrum", "--degree", "1") == 1
    assert run(tmp_path, "torelli-t6", "--n", "6", "--eps", "1.5") == 1


def test_example_report(tmp_path):
    assert run(tmp_path, "example-t3b3", "--points", "4", "--nx", "16") == 0
    report = read(tmp_path / "example-t3b3.json")
    assert report["gamma_in_HM"] is True
    assert report["levi_lambda"] <= 1e-12
    assert abs(report["period_T3"] - 1.0) <= 1e-10


def test_spectrum_report(tmp_path):
    out = tmp_path / "spectrum.json"
    assert run(tmp_path, "spectrum", "--degree", "3", "--mmax", "1", "--out", str(out)) == 0
    report = read(out)
    dims = {tuple(r["m"]): r["kernel_dim"] for r in report["modes"]}
    assert dims.pop((0, 0, 0)) == 1
    assert set(dims.values()) == {0}
    with open(out.with_suffix(".csv"), newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 27
    assert rows[0]["m"] == "-1 -1 -1"


def test_torelli_report_and_field_dump(tmp_path):
    dump = tmp_path / "psi.json"
    assert run(tmp_path, "torelli-t6", "--n", "4", "--max-iter", "2", "--rtol", "1e-12", "--dump-field", str(dump)) == 0
    report = read(tmp_path / "torelli-t6.json")
    assert report["solve"]["iterations"] == 2
    assert report["solve"]["period_drift"] < 1e-12
    assert report["final_psi"] == str(dump)
    assert load_field(dump).grid.shape == (4,) * 6
    with open(tmp_path / "torelli-t6.csv", newline="", encoding="utf-8") as f:
        assert len(list(csv.DictReader(f))) == 3


def test_boundary_solve_keeps_alpha_zero_on_the_boundary(tmp_path):
    assert run(tmp_path, "boundary-solve", "--nx", "8", "--nt", "1", "--max-iter", "2", "--rtol", "1e-12") == 0
    report = read(tmp_path / "boundary-solve.json")
    assert report["constraint"] == "boundary_zero"
    assert report["solve"]["boundary_alpha_max"] == 0.0


def test_selftest_passes(tmp_path):
    assert run(tmp_path, "selftest") == 0
    report = read(tmp_path / "selftest.json")
    assert report["passed"] is True
    assert {row["check"] for row in report["checks"]} == set(selftest.CHECKS)


def test_failing_selftest_writes_a_failure_report(tmp_path, monkeypatch):
    monkeypatch.setattr(selftest, "CHECKS", {"always_fails": lambda seed: (1.0, 0.0)})
    assert run(tmp_path, "selftest") == 2
    failure = read(tmp_path / "selftest-failure.json")
    assert failure["error"] == "NumericalFailure"
    assert failure["details"]["failed"] == ["always_fails"]


@pytest.mark.parametrize("argv", [
    ["example-t3b3", "--points", "4", "--nx", "8"],
    ["spectrum", "--degree", "3", "--mmax", "0"],
    ["analyze", json.dumps(FLAT_LITERAL)],
])
def test_reports_are_deterministic(tmp_path, argv):
    out = tmp_path / "report.json"
    assert run(tmp_path, *argv, "--out", str(out)) == 0
    first = out.read_bytes()
    assert run(tmp_path, *argv, "--out", str(out)) == 0
    assert out.read_bytes() == first


def test_subcommand_seed_overrides_the_global_seed(tmp_path):
    args = build_parser().parse_args(["--seed", "1", "example-t3b3", "--seed", "5"])
    assert args.seed == 5
    args = build_parser().parse_args(["--seed", "1", "example-t3b3"])
    assert args.seed == 1
