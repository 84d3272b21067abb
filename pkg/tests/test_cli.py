import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from nsclab.cli import main, render
from nsclab.matgen import write_matrix


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def records(text):
    return [json.loads(line) for line in text.splitlines()]


@pytest.fixture
def files(tmp_path, counterexample, d1_3111):
    a = tmp_path / "a.csv"
    d = tmp_path / "d1_3111.csv"
    write_matrix(counterexample, a)
    write_matrix(d1_3111, d, comment="null space spanned by [3, 1, 1, 1]")
    return str(a), str(d)


def test_nsc_counterexample(files, capsys):
    code, out, _ = run(["nsc", "--matrix", files[0], "--p", "0.5", "--k", "1"], capsys)
    (rec,) = records(out)
    assert code == 0
    assert rec["value"] == pytest.approx(1.0, abs=1e-12) and rec["status"] == "Exact"
    assert set(rec) >= {"op", "matrix_id", "p", "k", "value", "status", "certificate", "seed"}
    assert "ms" not in rec


def test_spark_gen(capsys):
    code, out, _ = run(["spark", "--gen", "gaussian:4x8", "--seed", "7"], capsys)
    (rec,) = records(out)
    assert code == 0 and rec["spark"] == 5 and rec["L"] == 4 and len(rec["witness"]) == 5


def test_pstar_d1(files, capsys):
    code, out, _ = run(["pstar", "--matrix", files[1], "--k", "1"], capsys)
    (rec,) = records(out)
    assert code == 0 and rec["kind"] == "Interior" and rec["p_lo"] <= 1.0 <= rec["p_hi"]


def test_infinite_value_is_null(files, capsys):
    code, out, _ = run(["nsc", "--matrix", files[1], "--p", "0.5", "--k", "4"], capsys)
    (rec,) = records(out)
    assert rec["value"] is None and rec["status"] == "Infinite" and rec["certificate"] is None


def test_curves_csv_columns(files, capsys):
    code, out, _ = run(["curves", "--matrix", files[1], "--p-grid", "0:1:3", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == ["p", "k", "gamma", "status"] and len(rows) == 9
    assert float(rows[0]["gamma"]) == pytest.approx(1 / 3)


def test_staircase_jobs_byte_identical(tmp_path):
    outs = []
    for jobs in ("1", "3"):
        path = tmp_path / f"s{jobs}.csv"
        res = subprocess.run([sys.executable, "-m", "nsclab", "staircase", "--gen", "gaussian:4x8", "--seed", "4",
                              "--p-grid", "0:1:6", "--restarts", "8", "--format", "csv", "--jobs", jobs,
                              "--out", str(path)], capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].decode().splitlines()[0] == "p,k_star"


def test_seed_from_env(monkeypatch, capsys):
    monkeypatch.setenv("NSCLAB_SEED", "7")
    _, out, _ = run(["spark", "--gen", "gaussian:3x5"], capsys)
    assert records(out)[0]["seed"] == 7 and records(out)[0]["matrix_id"] == "gaussian:3x5@7"


def test_witness_and_property_failure(capsys):
    code, out, _ = run(["witness", "--gen", "gaussian:4x6", "--seed", "3", "--p", "1", "--k", "2"], capsys)
    (rec,) = records(out)
    assert code == 0 and rec["objective_alt"] < rec["objective_true"]
    code, out, err = run(["witness", "--gen", "gaussian:4x6", "--seed", "3", "--p", "0.5", "--k", "1"], capsys)
    assert code == 1 and out == "" and "no failure witness" in err


def test_recover_and_gen(tmp_path, capsys):
    code, out, err = run(["recover", "--gen", "gaussian:4x8", "--normalize", "--p", "1", "--k", "1",
                          "--trials", "3"], capsys)
    assert code == 0 and len(records(out)) == 3 and "success rate" in err
    path = tmp_path / "m.csv"
    code, out, _ = run(["gen", "--gen", "uniform:2x3", "--out", str(path), "--format", "matrix"], capsys)
    assert code == 0 and path.read_text().startswith("# generated uniform:2x3@0")
    code, out, _ = run(["gen", "--gen", "gaussian:2x6", "--k", "2"], capsys)
    assert np.count_nonzero(records(out)[0]["vector"]) == 2


@pytest.mark.parametrize("argv", [
    ["nsc", "--p", "0.5", "--k", "1"],
    ["nsc", "--gen", "gaussian:2x3", "--matrix", "x.csv", "--p", "0.5", "--k", "1"],
    ["nsc", "--matrix", "does-not-exist.csv", "--p", "0.5", "--k", "1"],
    ["nsc", "--gen", "gaussian:2x3", "--k", "1"],
    ["nsc", "--gen", "cauchy:2x3", "--p", "0.5", "--k", "1"],
    ["pstar", "--gen", "gaussian:4x6", "--k", "9"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2 and out == "" and "usage:" in err


@pytest.mark.parametrize("argv", [
    ["nsc", "--gen", "gaussian:2x3", "--p", "1.5", "--k", "1"],
    ["curves", "--gen", "gaussian:2x3", "--p-grid", "0:2:5"],
    ["bogus"],
    ["verify", "thm9"],
])
def test_argparse_errors_exit_2(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_parse_error_reports_location(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,oops\n")
    code, _, err = run(["spark", "--matrix", str(path)], capsys)
    assert code == 2 and "line 2" in err and "column 2" in err


def test_verify_counterexample(capsys):
    code, out, err = run(["verify", "counterexample"], capsys)
    recs = records(out)
    assert code == 0 and "PASS counterexample.gamma_equals_1" in err
    assert max(1e-9 - r["margin"] for r in recs if r["check"] == "gamma_equals_1") <= 1e-9


def test_verify_failure_names_property(monkeypatch, capsys):
    from nsclab import suites
    scales = suites.load_scales()
    scales["counterexample"]["tol"] = -1.0  # impossible tolerance
    monkeypatch.setattr(suites, "load_scales", lambda: scales)
    code, _, err = run(["verify", "counterexample"], capsys)
    assert code == 1 and "gamma_equals_1" in err


def test_render_round_trip():
    recs = [{"op": "x", "p": 0.1 + 0.2, "value": None, "certificate": {"S": [0]}}]
    assert [json.loads(line) for line in render(recs, "jsonl").splitlines()] == recs
    rows = list(csv.DictReader(io.StringIO(render(recs, "csv"))))
    assert float(rows[0]["p"]) == 0.1 + 0.2 and rows[0]["value"] == ""
