import json

import numpy as np
import pytest

from wavescatter.cli import load_config, main, ConfigError


def _run(tmp_path, cfg, name="run"):
    p = tmp_path / f"{name}.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = main(["--config", str(p), "--out", str(out)])
    return code, json.loads((out / "manifest.json").read_text()), out


def test_validate(tmp_path):
    code, man, _ = _run(tmp_path, {"schema": 1, "kind": "validate"})
    assert code == 0 and man["results"]["all_passed"] and man["complete"]


def test_scatter_zero_field(tmp_path):
    code, man, out = _run(tmp_path, {"schema": 1, "kind": "scatter", "T": 4})
    assert code == 0
    data = np.loadtxt(out / "scattered.csv", delimiter=",", skiprows=1)
    assert not np.any(data[:, 1])


def test_scatter_is_deterministic(tmp_path):
    cfg = {"schema": 1, "kind": "scatter", "T": 4,
           "field": {"bump": {"amplitude": 0.5, "width": 2}, "s_max": 3}}
    _, _, a = _run(tmp_path, cfg, "a")
    _, _, b = _run(tmp_path, cfg, "b")
    assert (a / "scattered.csv").read_bytes() == (b / "scattered.csv").read_bytes()


def test_geometry_and_recover(tmp_path):
    code, man, _ = _run(tmp_path, {"schema": 1, "kind": "geometry"}, "g")
    assert code == 0 and man["results"]["gamma_on_cones"] < 1e-12
    code, man, _ = _run(tmp_path, {"schema": 1, "kind": "recover"}, "r")
    assert code == 0 and man["results"]["sup_error"] < 1e-6


def test_solve_and_radiate(tmp_path):
    grid = {"r_max": 10.0, "n": 500}
    code, man, out = _run(tmp_path, {"schema": 1, "kind": "solve", "grid": grid,
                                     "solver": {"end_time": 2.0}}, "s")
    assert code == 0 and man["results"]["relative_drift"] < 1e-3
    assert (out / "u_final.bin").exists()
    code, man, _ = _run(tmp_path, {"schema": 1, "kind": "radiate", "grid": grid, "T": 6.0}, "r")
    res = man["results"]
    assert code == 0 and res["norm_sq_minus"] == pytest.approx(res["energy"], rel=1e-2)


def test_expand_reports_slope(tmp_path):
    ups = [{"bump": {"amplitude": 1.0, "width": 2}, "s_max": 4},
           {"bump": {"amplitude": 0.4, "center": 0.5, "width": 1.5}, "s_max": 4}]
    code, man, _ = _run(tmp_path, {"schema": 1, "kind": "expand", "upsilons": ups, "T": 6,
                                   "orders": [1, 4]}, "e")
    assert code == 0
    assert man["results"]["orders"]["4"]["slope"] == pytest.approx(5, abs=0.3)


def test_exit_codes(tmp_path):
    code, man, _ = _run(tmp_path, {"schema": 1, "kind": "bogus"}, "k")
    assert code == 2 and not man["complete"]
    code, _, _ = _run(tmp_path, {"schema": 1, "kind": "validate",
                                 "nonlinearity": {"name": "power", "c": -1}}, "n")
    assert code == 2
    code, man, _ = _run(tmp_path, {"schema": 1, "kind": "scatter", "T": 4,
                                   "field": {"bump": {"amplitude": 20, "width": 1}}}, "x")
    assert code == 3 and man["error"]["type"] == "numerical_guard"


def test_config_checks(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"kind": "validate"}))
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text(json.dumps({"schema": 1, "kind": "scatter", "field": {"csv": "missing.csv"}}))
    with pytest.raises(ConfigError):
        load_config(p)
