import json

import numpy as np
import pytest

from nestmlmc import cli
from nestmlmc.discrete import oracle_u0
from nestmlmc.experiments import oracle_spec


def run_cli(args):
    return cli.main(args)


def read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    return header, rows


def test_level_stats_csv_shape_and_header(tmp_path):
    out = tmp_path / "levels.csv"
    rc = run_cli(["--mode", "level-stats", "--experiment", "discrete-oracle",
                  "--seed", "5", "--samples-per-level", "2000",
                  "--level-min", "0", "--level-max", "4", "-o", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert header == ["level", "sample_cost", "mean", "abs_mean", "var",
                      "kurtosis", "n"]
    assert len(rows) == 5
    assert [r["level"] for r in rows] == ["0", "1", "2", "3", "4"]
    assert all(r["n"] == "2000" for r in rows)
    variances = [float(r["var"]) for r in rows]
    assert all(a > b for a, b in zip(variances[1:], variances[2:]))


def test_level_stats_deterministic_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--mode", "level-stats", "--experiment", "discrete-oracle",
            "--seed", "9", "--samples-per-level", "500", "--level-max", "3"]
    assert run_cli(args + ["-o", str(a)]) == 0
    assert run_cli(args + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    assert run_cli(["--mode", "level-stats", "--experiment", "discrete-oracle",
                    "--seed", "10", "--samples-per-level", "500",
                    "--level-max", "3", "-o", str(c)]) == 0
    assert a.read_bytes() != c.read_bytes()


def test_threads_do_not_change_results(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--mode", "level-stats", "--experiment", "discrete-oracle",
            "--seed", "3", "--samples-per-level", "5000", "--level-max", "2",
            "--chunk-size", "1000"]
    assert run_cli(args + ["--threads", "1", "-o", str(a)]) == 0
    assert run_cli(args + ["--threads", "4", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_mlmc_sweep_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    rc = run_cli(["--mode", "mlmc-sweep", "--experiment", "discrete-oracle",
                  "--seed", "13", "--tolerances", "0.1", "0.05",
                  "--repetitions", "2", "-o", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert header == ["tol", "P", "cost", "L", "bias", "converged"]
    assert len(rows) == 4
    assert all(r["converged"] == "1" for r in rows)
    u0 = oracle_u0(oracle_spec())
    for r in rows:
        assert abs(float(r["P"]) - u0) < 3.0 * float(r["tol"])
    # tighter tolerance rows cost more
    c01 = min(int(r["cost"]) for r in rows if r["tol"] == "0.1")
    c005 = min(int(r["cost"]) for r in rows if r["tol"] == "0.05")
    assert c005 > c01


def test_baseline_mode_costs_more(tmp_path):
    s, b = tmp_path / "s.csv", tmp_path / "b.csv"
    common = ["--experiment", "discrete-oracle", "--seed", "17",
              "--tolerances", "0.08"]
    assert run_cli(["--mode", "mlmc-sweep", *common, "-o", str(s)]) == 0
    assert run_cli(["--mode", "baseline", *common, "-o", str(b)]) == 0
    _, srows = read_csv(s)
    _, brows = read_csv(b)
    assert int(brows[0]["cost"]) > int(srows[0]["cost"])


def test_oracle_check_passes_and_reports(tmp_path, capsys):
    out = tmp_path / "report.txt"
    rc = run_cli(["--mode", "oracle-check", "--experiment", "discrete-oracle",
                  "--seed", "19", "-o", str(out)])
    assert rc == 0
    report = out.read_text()
    assert "FAIL" not in report
    assert "properties passed" in report


def test_oracle_check_broken_coupling_fails(tmp_path):
    spec = oracle_spec(break_coupling=True)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "experiment": "discrete-oracle", "mode": "oracle-check",
        "seed": 19, "spec": spec.to_dict()}))
    out = tmp_path / "report.txt"
    rc = run_cli(["--config", str(cfg), "-o", str(out)])
    assert rc == 1
    assert "FAIL telescoping" in out.read_text()


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "experiment": "discrete-oracle", "mode": "level-stats",
        "seed": 23, "samples_per_level": 100, "level_max": 2}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli(["--config", str(cfg), "-o", str(a)]) == 0
    # the flag wins over the file value
    assert run_cli(["--config", str(cfg), "--level-max", "1",
                    "-o", str(b)]) == 0
    assert len(read_csv(a)[1]) == 3
    assert len(read_csv(b)[1]) == 2


def test_config_error_exit_codes(tmp_path):
    assert run_cli(["--mode", "level-stats", "--tolerances", "0.05",
                    "0.1"]) == 2  # increasing tolerances
    assert run_cli(["--mode", "oracle-check",
                    "--experiment", "bermudan-euler"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli(["--config", str(bad)]) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"walrus": 1}))
    assert run_cli(["--config", str(unknown)]) == 2


def test_io_error_exit_code(tmp_path):
    rc = run_cli(["--mode", "level-stats", "--experiment", "discrete-oracle",
                  "--samples-per-level", "10", "--level-max", "1",
                  "-o", "/nonexistent-dir/x.csv"])
    assert rc == 3
    assert run_cli(["--config", str(tmp_path / "missing.json")]) == 3


def test_csv_is_locale_independent(tmp_path):
    out = tmp_path / "x.csv"
    run_cli(["--mode", "level-stats", "--experiment", "discrete-oracle",
             "--seed", "2", "--samples-per-level", "300", "--level-max", "2",
             "-o", str(out)])
    text = out.read_text(encoding="utf-8")
    assert "," in text and ";" not in text
    # decimal points only, no thousands separators or locale commas
    for row in text.splitlines()[1:]:
        for fieldvalue in row.split(","):
            float(fieldvalue)


def test_run_config_validation_direct():
    cfg = cli.RunConfig(tolerances=[0.1, 0.1])
    with pytest.raises(cli.ConfigError):
        cfg.validate()
    cfg = cli.RunConfig(kind="bogus")
    with pytest.raises(cli.ConfigError):
        cfg.validate()
    cli.RunConfig().validate()
