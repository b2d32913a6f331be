import json
from pathlib import Path

import jsonschema
import pytest

from hypsig import artifacts
from hypsig.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERICAL, EXIT_OK, main

SCHEMAS = Path(__file__).resolve().parents[1] / "schemas"
COLUMNS = json.loads((SCHEMAS / "csv_columns.json").read_text())


def _schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


def _valid(path, name):
    jsonschema.validate(artifacts.read_json(path), _schema(name))


def _columns(path, key):
    cols, _ = artifacts.read_csv(path)
    assert cols == COLUMNS[key]


def test_chain_exact_alpha_grid(tmp_path):
    out = tmp_path / "c"
    assert main(["--mode", "ChainExact", "--alpha", "0,1", "--L", "1,2,4,8,16", "--out", str(out)]) == EXIT_OK
    _columns(out / "chain.csv", "chain.csv")
    _, rows = artifacts.read_csv(out / "chain.csv")
    zero = [r for r in rows if r["alpha"] == 0.0]
    assert len(zero) == 5 and all(abs(r["Te_value"]) <= 1e-10 for r in zero)
    _valid(out / "manifest.json", "manifest")
    _valid(out / "chain_report.json", "chain_report")
    man = artifacts.read_json(out / "manifest.json")
    assert man["status"] == "ok" and man["exit_code"] == 0
    assert sorted(man["artifacts"]) == ["chain.csv", "chain_report.json"]


def test_simulate_zero_sweeps(tmp_path):
    out = tmp_path / "s"
    assert main(["--mode", "Simulate", "--dims", "6x6", "--sweeps", "0", "--therm", "0", "--out", str(out)]) == 0
    files = sorted((out / "series").glob("*.csv"))
    assert files
    for f in files:
        assert f.read_text() == "sweep_index,value\n"
    _valid(out / "summary.json", "run_summary")
    _valid(out / "manifest.json", "manifest")
    assert artifacts.read_checkpoint(out / "final.hsig")["sweep"] == 0


def test_simulate_reruns_are_byte_identical(tmp_path):
    args = ["--mode", "Simulate", "--dims", "5x5", "--sweeps", "40", "--therm", "5", "--seed", "3", "--N", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.suffix in (".csv", ".hsig"))
    assert a
    for rel in a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
        if rel.suffix == ".csv":
            _columns(tmp_path / "a" / rel, "series/<observable>.csv")


def test_config_file_and_print(tmp_path, capsys):
    cfg = tmp_path / "x.ini"
    cfg.write_text("[experiment]\nmode = Spectrum\n[model]\nN = 3\n")
    assert main(["--config", str(cfg), "--print-config"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["mode"] == "Spectrum" and printed["N"] == 3


def test_spectrum_mode(tmp_path):
    out = tmp_path / "sp"
    assert main(["--mode", "Spectrum", "--N", "2", "--out", str(out)]) == 0
    _columns(out / "spectrum.csv", "spectrum.csv")
    _valid(out / "spectrum_report.json", "spectrum_report")
    _, rows = artifacts.read_csv(out / "spectrum.csv")
    assert len(rows) == 4 and all(r["lowest_eigenvalue"] >= 0.25 - 1e-6 for r in rows)


def test_ward_mode(tmp_path):
    out = tmp_path / "w"
    code = main(["--mode", "WardCheck", "--dims", "6x6", "--sweeps", "3000", "--therm", "200", "--seed", "2",
                 "--out", str(out)])
    assert code == EXIT_OK
    _columns(out / "ward.csv", "ward.csv")
    _valid(out / "ward_report.json", "ward_report")


def test_crossval_mode(tmp_path):
    out = tmp_path / "cv"
    code = main(["--mode", "CrossValidate", "--L", "4", "--sweeps", "20000", "--therm", "500", "--seed", "1",
                 "--alpha", "0.881373587019543,1", "--out", str(out)])
    assert code == EXIT_OK
    _columns(out / "crossval.csv", "crossval.csv")
    _valid(out / "crossval_report.json", "crossval_report")
    rep = artifacts.read_json(out / "crossval_report.json")
    assert {r["observable"] for r in rep["rows"]} == {"te_alpha_0.881374", "te_alpha_1.000000", "two_point_r1"}
    assert all(r["sigma"] > 0 for r in rep["rows"]) and rep["n_measurements"] == 20000


def test_config_error_writes_nothing(tmp_path, capsys):
    out = tmp_path / "bad"
    assert main(["--mode", "Simulate", "--beta", "-1", "--out", str(out)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["key"] == "beta" and err["exit_code"] == 2
    assert not out.exists()
    assert main(["--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_unknown_flag_is_config_error():
    with pytest.raises(SystemExit) as exc:
        main(["--mode", "Simulate", "--bogus", "1"])
    assert exc.value.code == 2


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("HYPSIG_THREADS", "zero")
    out = tmp_path / "t"
    assert main(["--mode", "Spectrum", "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_thread_env_recorded(tmp_path, monkeypatch):
    monkeypatch.setenv("HYPSIG_THREADS", "1")
    out = tmp_path / "t1"
    assert main(["--mode", "Simulate", "--dims", "4x4", "--sweeps", "5", "--therm", "0", "--out", str(out)]) == 0
    assert artifacts.read_json(out / "manifest.json")["threads"] == 1


def test_invariant_failure(tmp_path):
    out = tmp_path / "coarse"
    code = main(["--mode", "ChainExact", "--nodes", "40", "--modes", "8", "--L", "1,2,4", "--alpha", "0,1",
                 "--out", str(out)])
    assert code == EXIT_INVARIANT
    man = artifacts.read_json(out / "manifest.json")
    assert man["status"] == "invariant_failure"
    assert not next(c for c in man["checks"] if c["name"] == "grid_self_calibration")["passed"]
    _valid(out / "manifest.json", "manifest")


def test_numerical_failure(tmp_path, capsys):
    out = tmp_path / "num"
    assert main(["--mode", "ChainExact", "--beta", "2000", "--L", "1,2", "--alpha", "1", "--out", str(out)]) \
        == EXIT_NUMERICAL
    man = artifacts.read_json(out / "manifest.json")
    assert man["status"] == "numerical_failure" and man["error"]["type"] == "NumericalFailure"
    _valid(out / "manifest.json", "manifest")
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["exit_code"] == 4
