import io
import json
import math

import numpy as np
import pytest

from duoirs import ConfigError, ExperimentSpec, ResultTable, emit_csv
from duoirs.cli import main as cli_main
from duoirs.harness import run_experiment


def run_csv_bytes(spec):
    buf = io.StringIO()
    emit_csv(run_experiment(spec), buf)
    return buf.getvalue()


def test_experiment_spec_strict_keys():
    spec = ExperimentSpec.from_dict({"experiment": "overhead_vs_N",
                                     "n_values": [10, 20], "m1": 20, "m2": 20})
    assert spec.experiment == "overhead_vs_N"
    assert spec.m1 == 20
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({"experiment": "overhead_vs_N", "bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({})
    with pytest.raises(ConfigError):
        ExperimentSpec(experiment="not_an_experiment")
    with pytest.raises(ConfigError):
        ExperimentSpec(experiment="mse_single_user", trials=0)


def test_experiment_spec_from_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"experiment": "mse_design_phase1", "trials": 5,
                                "powers_dbm": [15.0]}))
    spec = ExperimentSpec.from_json(str(path))
    assert spec.trials == 5
    assert spec.powers_dbm == [15.0]


def test_emit_csv_format(tmp_path):
    table = ResultTable()
    buf = io.StringIO()
    emit_csv(table, buf)
    assert buf.getvalue() == "sweep,metric,mean,stderr,trials,theory\n"

    table.add(15.0, "nmse_r", 1.25e-3, 2.5e-5, 100, 1.2e-3)
    path = tmp_path / "out.csv"
    emit_csv(table, str(path))
    text = path.read_text()
    lines = text.split("\n")
    assert lines[0] == "sweep,metric,mean,stderr,trials,theory"
    assert len(lines) == 3 and lines[2] == ""
    assert "\r" not in text
    sweep, metric, mean, stderr, trials, theory = lines[1].split(",")
    assert metric == "nmse_r"
    assert float(sweep) == 15.0
    assert float(mean) == 1.25e-3
    assert float(stderr) == 2.5e-5
    assert int(trials) == 100
    assert float(theory) == 1.2e-3


def test_emit_csv_full_precision_roundtrip():
    table = ResultTable()
    rng = np.random.default_rng(0)
    vals = [float(v) for v in rng.random(4) * 10.0 ** rng.integers(-12, 3, 4)]
    table.add(1, "a", vals[0], vals[1], 7, vals[2])
    table.add(2, "b", vals[3], 0.0, 7, math.nan)
    buf = io.StringIO()
    emit_csv(table, buf)
    rows = buf.getvalue().strip().split("\n")[1:]
    got = [r.split(",") for r in rows]
    assert float(got[0][2]) == vals[0]
    assert float(got[0][3]) == vals[1]
    assert float(got[0][5]) == vals[2]
    assert float(got[1][2]) == vals[3]
    assert got[1][5] == "nan"


def test_csv_byte_identical_reruns():
    spec = dict(experiment="mse_design_phase1", n=8, m1=8, m2=8, k=1,
                trials=5, seed=3, powers_dbm=(15.0,))
    a = run_csv_bytes(ExperimentSpec(**spec))
    b = run_csv_bytes(ExperimentSpec(**spec))
    assert a == b
    c = run_csv_bytes(ExperimentSpec(**{**spec, "seed": 4}))
    assert a != c


def test_overhead_experiment_rows():
    spec = ExperimentSpec(experiment="overhead_vs_N", m1=20, m2=20, k=1,
                          n_values=(10, 20, 45))
    table = run_experiment(spec)
    want = {10: 83, 20: 62, 45: 62}
    for n, cell in want.items():
        row = table.value(n, "overhead_proposed")
        assert row.mean == cell
        assert row.theory == cell
    assert table.value(10, "overhead_decoupled").mean == 80
    assert table.value(10, "overhead_per_antenna").mean == 440


def test_design_mse_matches_theory():
    spec = ExperimentSpec(experiment="mse_design_phase1", n=8, m1=8, m2=8,
                          k=1, trials=150, seed=0, powers_dbm=(15.0,))
    table = run_experiment(spec)
    row = table.value(15.0, "phase1_optimal")
    assert np.isfinite(row.theory)
    assert abs(row.mean - row.theory) < 3 * row.stderr


def test_noise_free_power_gives_zero_mse():
    spec = ExperimentSpec(experiment="mse_design_phase1", n=8, m1=8, m2=8,
                          k=1, trials=4, seed=0, powers_dbm=(math.inf,))
    table = run_experiment(spec)
    for row in table.rows:
        assert row.mean <= 1e-20
        if np.isfinite(row.theory):
            assert row.theory == 0.0


def test_allocation_interior_minimum_wide_area():
    # wide-area trade-off: with the total budget fixed, the joint-fit MSE
    # is worst at both allocation extremes
    grid = (21, 700, 1021)
    spec = ExperimentSpec(experiment="mse_vs_allocation", n=25, m1=20, m2=20,
                          k=1, trials=40, seed=0, budget=1062,
                          i1_values=grid, geometry="wide_area",
                          powers_dbm=(15.0,))
    table = run_experiment(spec)
    means = [table.value(i1, "nmse_e").mean for i1 in grid]
    assert int(np.argmin(means)) == 1
    assert means[0] > means[1] and means[-1] > means[1]


def test_cli_exit_codes(tmp_path, capsys):
    assert cli_main([]) == 1
    capsys.readouterr()

    assert cli_main(["version"]) == 0
    assert capsys.readouterr().out.strip()

    assert cli_main(["overhead", "--scheme", "proposed", "--n", "45",
                     "--m1", "20", "--m2", "20", "--k", "1"]) == 0
    assert capsys.readouterr().out.strip() == "62"

    with pytest.raises(SystemExit) as exc:
        cli_main(["--help"])
    assert exc.value.code == 0
    capsys.readouterr()

    # argparse rejections are config errors, not crashes
    with pytest.raises(SystemExit) as exc:
        cli_main(["overhead", "--scheme", "proposed"])
    assert exc.value.code == 1
    capsys.readouterr()

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"experiment": "unknown"}))
    assert cli_main(["run", "--config", str(bad)]) == 1
    capsys.readouterr()


def test_cli_run_writes_csv(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": "mse_design_phase1", "n": 8,
                               "m1": 8, "m2": 8, "k": 1, "trials": 9,
                               "powers_dbm": [15.0]}))
    out = tmp_path / "res.csv"
    assert cli_main(["run", "--config", str(cfg), "--trials", "4",
                     "--out", str(out)]) == 0
    capsys.readouterr()
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "sweep,metric,mean,stderr,trials,theory"
    assert all(row.split(",")[4] == "4" for row in lines[1:])

    # repeat run is byte identical
    out2 = tmp_path / "res2.csv"
    assert cli_main(["run", "--config", str(cfg), "--trials", "4",
                     "--out", str(out2)]) == 0
    capsys.readouterr()
    assert out.read_bytes() == out2.read_bytes()


def test_cli_design_verify(tmp_path, capsys):
    cfg = tmp_path / "design.json"
    cfg.write_text(json.dumps({"n": 8, "m1": 8, "m2": 8, "k": 1}))
    for phase in ("1", "2", "3"):
        assert cli_main(["design", "verify", "--phase", phase,
                         "--config", str(cfg)]) == 0
        assert "PASS" in capsys.readouterr().out

    # case 2 path (n < m2) also certifies
    cfg.write_text(json.dumps({"n": 4, "m1": 8, "m2": 8, "k": 1}))
    assert cli_main(["design", "verify", "--phase", "2",
                     "--config", str(cfg)]) == 0
    assert "PASS" in capsys.readouterr().out
