import csv
import io
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from eqone import cli
from eqone.errors import NumericError


def schema(name):
    return json.loads(resources.files("eqone").joinpath(f"data/schemas/{name}.schema.json").read_text())


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_formula_unity(capsys):
    doc = run_json(capsys, "formula", "--j", "0.5", "--gamma", "1", "--n", "1", "--t", "1", "--units", "natural")
    assert doc["delta_b"] == 1.0
    jsonschema.validate(doc, schema("formula"))


def test_formula_edm_and_single_spin(capsys):
    doc = run_json(capsys, "formula", "--e-field", "2", "--t", "4", "--t1", "1")
    assert doc["delta_d"] == pytest.approx(0.125)
    assert doc["delta_b_single_spin"] == pytest.approx(0.5)
    jsonschema.validate(doc, schema("formula"))


def test_formula_si_conversion_factor(capsys):
    args = ["formula", "--j", "1.5", "--gamma", "30", "--n", "1e9", "--t", "2", "--g", "2"]
    nat = run_json(capsys, *args)
    si = run_json(capsys, *args, "--units", "si")
    c = cli.load_constants()
    assert si["delta_b"] == pytest.approx(nat["delta_b"] * c["hbar"] / c["bohr_magneton"], rel=1e-15)


def test_optimize_prints_two(capsys):
    doc = run_json(capsys, "optimize")
    assert doc["optimal_optical_depth"] == pytest.approx(2.0, abs=1e-3)
    assert doc["formatted"] == "2.000"
    jsonschema.validate(doc, schema("optimize"))


def test_simulate_schema_and_fields(capsys):
    doc = run_json(capsys, "simulate", "--j", "0.5", "--omega", "0", "--n", "50", "--reps", "20", "--seed", "7")
    jsonschema.validate(doc, schema("campaign"))
    assert doc["config"]["seed"] == 7
    assert doc["result"]["shots"] == 1000


def test_simulate_twice_byte_identical(capsys):
    args = ["simulate", "--j", "0.5", "--omega", "0", "--seed", "7"]
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_seed_precedence(capsys, monkeypatch, tmp_path):
    base = ["simulate", "--n", "10", "--reps", "10"]
    default = run_json(capsys, *base)["config"]["seed"]
    assert default == 3735928559
    monkeypatch.setenv("EQONE_SEED", "42")
    assert run_json(capsys, *base)["config"]["seed"] == 42
    assert run_json(capsys, *base, "--seed", "9")["config"]["seed"] == 9
    assert run_json(capsys, "--seed", "8", *base)["config"]["seed"] == 8
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 5, "omega": 0.1}))
    doc = run_json(capsys, *base, "--config", str(cfg))
    assert doc["config"]["seed"] == 5 and doc["config"]["omega"] == 0.1
    assert run_json(capsys, *base, "--config", str(cfg), "--seed", "6")["config"]["seed"] == 6


def test_config_validates_against_schema(tmp_path, capsys):
    cfg = {"seed": 5, "units": "si", "constants": {"hbar": 1.0, "bohr_magneton": 2.0}, "j": 1, "n": 10, "reps": 10}
    jsonschema.validate(cfg, schema("config"))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    doc = run_json(capsys, "simulate", "--config", str(path), "--omega", "0.2")
    assert doc["field"]["b_hat"] == pytest.approx(doc["result"]["omega_hat"] * 0.5)


def test_unknown_config_key(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "formula", "--config", str(path))
    assert code == 2 and "bogus" in err


def test_unknown_subcommand_and_flag(capsys):
    code, _, err = run(capsys, "nope")
    assert code == 2 and "usage" in err
    code, _, err = run(capsys, "formula", "--frobnicate")
    assert code == 2 and "usage" in err


def test_config_error_exit_code(capsys):
    code, _, err = run(capsys, "simulate", "--omega", "5")
    assert code == 2 and "pi/2" in err
    code, _, _ = run(capsys, "formula", "--gamma", "-1")
    assert code == 2
    code, _, _ = run(capsys, "formula", "--format", "csv")
    assert code == 2


def test_numeric_failure_exit_code(capsys, monkeypatch):
    def boom(opts):
        raise NumericError("non-finite")

    monkeypatch.setitem(cli.COMMANDS, "formula", boom)
    code, _, err = run(capsys, "formula")
    assert code == 3 and "numeric" in err


def test_out_path(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, stdout, _ = run(capsys, "formula", "--out", str(out))
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["delta_b"] == 1.0


def test_faraday_point_and_scan(capsys):
    doc = run_json(capsys, "faraday", "--n", "100", "--omega", "0.01")
    jsonschema.validate(doc, schema("faraday"))
    assert doc["result"]["delta_b_scaled"] == pytest.approx(0.025)
    code, out, _ = run(capsys, "faraday", "--scan", "0:4:5")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["x", "snr", "delta_b_scaled"]
    assert len(rows) == 5 and float(rows[0]["snr"]) == 0.0
    doc = run_json(capsys, "faraday", "--scan", "0.5:4:8", "--format", "json")
    jsonschema.validate(doc, schema("faraday-scan"))


def test_faraday_nonlinear_field_is_config_error(capsys):
    assert run(capsys, "faraday", "--omega", "0.5")[0] == 2


def test_sweep_csv_and_json(capsys):
    args = ["sweep", "--model", "formula", "--param", "gamma", "--values", "1,2,4,8,16"]
    code, out, _ = run(capsys, *args)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["param", "delta_b", "delta_b_err"]
    doc = run_json(capsys, *args, "--format", "json")
    jsonschema.validate(doc, schema("sweep"))
    assert doc["fit"]["exponent"] == pytest.approx(0.5, abs=1e-10)


def test_sweep_mc_json(capsys):
    doc = run_json(
        capsys, "sweep", "--param", "n_spins", "--values", "10,20,40,80", "--campaigns", "30", "--reps", "10", "--format", "json"
    )
    jsonschema.validate(doc, schema("sweep"))
    assert doc["fit"]["exponent"] < 0


def test_equivalence_json(capsys):
    doc = run_json(capsys, "equivalence", "--n", "50", "--reps", "20", "--campaigns", "60", "--omega", "0.01")
    jsonschema.validate(doc, schema("equivalence"))
    assert doc["mc_formula_within_band"]


def test_module_entry_point_subprocess():
    out = subprocess.run(
        [sys.executable, "-m", "eqone", "formula"], capture_output=True, text=True, check=True
    ).stdout
    assert json.loads(out)["delta_b"] == 1.0
