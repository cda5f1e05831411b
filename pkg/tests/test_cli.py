import csv
import json
import math

import numpy as np
import pytest

from sgld_stream.cli import main
from sgld_stream.config import ConfigError, parse_config


def base(**over):
    cfg = {"schema_version": 1, "seed": 11,
           "model": {"kind": "linear", "d": 1},
           "stream": {"kind": "ar1", "rho": 0.0},
           "noise": {"kind": "gaussian"},
           "chain": {"lambda": 0.1, "horizon": 50, "theta0": [0.0], "n_chains": 200}}
    cfg.update(over)
    return cfg


def run(tmp_path, cmd, cfg, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    out = tmp_path / f"out_{cmd}_{len(list(tmp_path.iterdir()))}"
    code = main([cmd, "--config", str(path), "--out", str(out), *extra])
    return code, out


def test_round_trip():
    cfg = parse_config(base(chain={"lambda": 0.1, "horizon": 5, "theta0": {"norm": 3.0}}))
    again = parse_config(json.loads(cfg.dumps()))
    assert again == cfg
    assert math.isclose(np.linalg.norm(cfg.chain["theta0"]), 3.0)


@pytest.mark.parametrize("patch, field", [
    ({"schema_version": 2}, "schema_version"),
    ({"stream": {"kind": "ar1", "rho": 1.2}}, "stream.rho"),
    ({"noise": {"kind": "uniform"}}, "noise.kind"),
    ({"chain": {"lambda": 0.1, "horizon": 5, "theta0": [0.0, 1.0]}}, "chain.theta0"),
    ({"chain": {"lambda": 2.0, "horizon": 5, "theta0": [0.0]}}, "chain.lambda"),
    ({"model": {"kind": "linear", "dd": 1}}, "model.dd"),
])
def test_invalid_config_names_field(patch, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(base(**patch))
    assert exc.value.path == field


def test_invalid_config_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "run", base(stream={"kind": "ar1", "rho": 1.5}))
    assert code == 2 and "stream.rho" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_zero_horizon_run(tmp_path):
    code, out = run(tmp_path, "run", base(chain={"lambda": 0.1, "horizon": 0, "theta0": [1.5],
                                                 "n_chains": 7}))
    assert code == 0
    rows = list(csv.reader(open(out / "snapshots.csv")))
    assert rows[0] == ["chain_id", "t", "theta_0"]
    assert len(rows) == 8 and all(r[1] == "0" and float(r[2]) == 1.5 for r in rows[1:])
    summary = json.load(open(out / "summary.json"))
    assert summary["n_diverged"] == 0 and summary["master_seed"] == 11


def test_run_is_byte_identical_across_threads(tmp_path):
    cfg = base()
    _, a = run(tmp_path, "run", cfg)
    _, b = run(tmp_path, "run", cfg, "--threads", "3")
    for f in ("snapshots.csv", "summary.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    _, c = run(tmp_path, "run", cfg, "--seed", "12")
    assert (a / "snapshots.csv").read_bytes() != (c / "snapshots.csv").read_bytes()


def test_run_stationary_variance(tmp_path):
    cfg = base(chain={"lambda": 0.1, "horizon": 1000, "theta0": [0.0], "n_chains": 4000,
                      "checkpoints": [0, 1000]})
    code, out = run(tmp_path, "run", cfg)
    var = json.load(open(out / "summary.json"))["moments"][-1]["cov"][0][0]
    target = 0.11 / 0.19
    assert code == 0 and abs(var - target) < 3 * target * math.sqrt(2 / 4000)


def test_run_all_diverged(tmp_path):
    cfg = base(model={"kind": "anti_dissipative"},
               chain={"lambda": 1.0, "horizon": 100, "theta0": [1.0], "n_chains": 5})
    assert run(tmp_path, "run", cfg)[0] == 3


def test_check_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "check", base())[0] == 0
    capsys.readouterr()
    bad = base(constants={"Delta": 0.9, "b": {"scale": 0.5, "degree": 2, "offset": 0},
                          "K1": 1, "K2": 1, "K3": 0, "beta": 1})
    assert run(tmp_path, "check", bad)[0] == 1
    report = json.loads(capsys.readouterr().out)
    assert report["reports"][0]["n_violations"] > 0 and report["reports"][0]["violations"]
    assert run(tmp_path, "check", base(model={"kind": "anti_dissipative"}))[0] == 1


def test_drift_certificate(tmp_path):
    cfg = base(drift={"theta_grid": [[-2.0], [0.0], [3.0]], "y_grid": [[-1.0], [1.0]],
                      "n_samples": 20000})
    code, out = run(tmp_path, "drift", cfg)
    cert = json.load(open(out / "certificate.json"))
    assert code == 0
    assert abs(cert["certificate"]["gamma"] - 0.93) < 1e-15
    assert cert["moment_bound"]["value"] == pytest.approx(0.93 / 0.07 * 5)


def test_drift_step_size_too_large(tmp_path, capsys):
    cfg = base(chain={"lambda": 0.5, "horizon": 5, "theta0": [0.0]})
    code, _ = run(tmp_path, "drift", cfg)
    assert code == 4 and "0.33333333333333331" in capsys.readouterr().err


def test_minorize_certificate(tmp_path):
    cfg = base(chain={"lambda": 0.25, "horizon": 5, "theta0": [0.0]},
               minorize={"n": 1, "theta_grid": [[-1.0], [1.0]], "y_grid": [[0.0]],
                         "n_samples": 20000, "sets": ["ball", "upper_half", "empty"]})
    code, out = run(tmp_path, "minorize", cfg)
    cert = json.load(open(out / "certificate.json"))
    assert code == 0 and len(cert["checks"]) == 6
    assert cert["certificate"]["alpha"] == pytest.approx(5.9469e-6, rel=1e-4)


def test_tv_series(tmp_path):
    cfg = base(tv={"theta0_A": [0.0], "theta0_B": [10.0], "checkpoints": [0, 200],
                   "n_chains": 4000})
    code, out = run(tmp_path, "tv", cfg)
    rows = list(csv.reader(open(out / "tv_series.csv")))
    assert rows[0] == ["t", "tv", "tv_se", "noise_floor"]
    assert float(rows[1][1]) == 1.0 and float(rows[2][1]) < 0.05
    assert code == 0 and json.load(open(out / "tv_summary.json"))["passed"]
