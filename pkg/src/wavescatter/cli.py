"""Batch driver: ``wavescatter --config run.json --out DIR [--threads N]``.

A run config is a JSON object with ``"schema": 1`` and ``"kind"`` one of
validate, solve, radiate, scatter, expand, geometry, recover. Every run writes
``manifest.json`` (config echo, versions, runtime, results) plus CSV/binary
outputs into the output directory.

Exit codes: 0 success, 2 bad config or failed precondition, 3 numerical guard.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path

SCHEMA = 1
KINDS = ("validate", "solve", "radiate", "scatter", "expand", "geometry", "recover")
EXIT_OK, EXIT_PRECONDITION, EXIT_GUARD = 0, 2, 3


class ConfigError(ValueError):
    pass


def load_config(path: str | os.PathLike) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema") != SCHEMA:
        raise ConfigError(f"config needs \"schema\": {SCHEMA}")
    if cfg.get("kind") not in KINDS:
        raise ConfigError(f"unknown experiment kind {cfg.get('kind')!r}; expected one of {KINDS}")
    base = Path(path).resolve().parent
    for key, value in _file_refs(cfg):
        p = Path(value)
        if not p.is_absolute():
            p = base / p
        if not p.exists():
            raise ConfigError(f"{key}: file {value} does not exist")
    return cfg


def _file_refs(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            if k == "csv" and isinstance(v, str):
                yield prefix + k, v
            else:
                yield from _file_refs(v, f"{prefix}{k}.")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _file_refs(v, f"{prefix}{i}.")


# ---------------------------------------------------------------------------
# builders (imported lazily so --threads is applied before numpy loads)


def _np():
    import numpy as np
    return np


def _nonlinearity(cfg: dict):
    from .nonlinearity import from_spec
    spec = cfg.get("nonlinearity", {"name": "power"})
    try:
        return from_spec(dict(spec))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"nonlinearity: {exc}") from exc


def _bump_derivative(x):
    np = _np()
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    xm = x[m]
    out[m] = np.exp(-1 / (1 - xm**2)) * (-2 * xm / (1 - xm**2) ** 2)
    return out


def _field(spec: dict | None, base: Path, h_default: float = 0.02):
    """Radiation field from {"bump": {...}}, {"s": [...], "values": [...]} or {"csv": path}."""
    np = _np()
    from .radiation import RadiationFieldData
    if spec is None:
        return None
    if "csv" in spec:
        p = Path(spec["csv"])
        data = np.loadtxt(p if p.is_absolute() else base / p, delimiter=",", skiprows=1, ndmin=2)
        return RadiationFieldData(data[:, 0], data[:, 1])
    if "s" in spec:
        return RadiationFieldData(np.asarray(spec["s"], float), np.asarray(spec["values"], float))
    if "bump" in spec:
        b = spec["bump"]
        h = float(spec.get("h", h_default))
        a, c, w = float(b.get("amplitude", 1.0)), float(b.get("center", 0.0)), float(b.get("width", 1.0))
        if w <= 0:
            raise ConfigError("bump width must be positive")
        smax = float(spec.get("s_max", abs(c) + w + 1.0))
        n = int(np.ceil(smax / h))
        s = np.arange(-n, n + 1) * h
        return RadiationFieldData(s, a * _bump_derivative((s - c) / w) / w)
    if spec.get("zero"):
        h = float(spec.get("h", h_default))
        n = int(np.ceil(float(spec.get("s_max", 4.0)) / h))
        s = np.arange(-n, n + 1) * h
        return RadiationFieldData(s, np.zeros(s.size))
    raise ConfigError(f"cannot build a radiation field from {sorted(spec)}")


def _radial_data(cfg: dict):
    np = _np()
    from .grids_norms import CauchyData, RadialGrid
    g = cfg.get("grid", {})
    grid = RadialGrid(float(g.get("r_max", 20.0)), int(g.get("n", 2048)))
    r = grid.r
    d = cfg.get("data", {})
    amp, c, w = float(d.get("amplitude", 1.0)), float(d.get("center", 3.0)), float(d.get("width", 1.0))
    phi = amp * np.exp(-((r - c) / w) ** 2)
    va = float(d.get("velocity_amplitude", 0.0))
    psi = va * np.exp(-((r - c) / w) ** 2)
    return CauchyData(phi, psi, grid)


def _window(cfg: dict, F):
    from .radiation import RadialWindow
    T = float(cfg.get("T", 10.0))
    return RadialWindow.for_field(F, T=T)


# ---------------------------------------------------------------------------
# pipelines: each returns (results, outputs)


def run_validate(cfg, out: Path, base: Path):
    np = _np()
    from .grids_norms import write_csv
    from .nonlinearity import validate_hypotheses
    nl = _nonlinearity(cfg)
    g = cfg.get("grid", {})
    umax, n = float(g.get("u_max", 10.0)), int(g.get("n", 10001))
    u = np.linspace(-umax, umax, n if n % 2 else n + 1)
    rep = validate_hypotheses(nl, u)
    write_csv(out / "nonlinearity.csv", {"u": u, **{f"f{j}": nl.derivatives[j](u) for j in range(6)}})
    return rep.as_dict(), ["nonlinearity.csv"]


def run_solve(cfg, out: Path, base: Path):
    np = _np()
    from .grids_norms import energy_semilinear, write_binary, write_csv
    from .wave_solver import SolverConfig, solve_semilinear_radial
    nl = _nonlinearity(cfg)
    d = _radial_data(cfg)
    s = cfg.get("solver", {})
    sc = SolverConfig(float(s.get("end_time", 10.0)), float(s.get("cfl", 1.0)),
                      snapshot_stride=int(s.get("snapshot_stride", 8)))
    tr = solve_semilinear_radial(nl, d, sc)
    E = np.array([energy_semilinear(tr.snapshot(k), nl) for k in range(len(tr))])
    drift = float(np.max(np.abs(E - E[0])) / E[0]) if E[0] > 0 else 0.0
    write_csv(out / "energy.csv", {"t": tr.times, "energy": E})
    write_binary(out / "u_final.bin", tr.u[-1])
    return {"energy0": float(E[0]), "relative_drift": drift, "snapshots": len(tr)}, \
        ["energy.csv", "u_final.bin"]


def run_radiate(cfg, out: Path, base: Path):
    from .grids_norms import energy_semilinear
    from .radiation import radiation_semilinear
    nl = _nonlinearity(cfg)
    d = _radial_data(cfg)
    res, files = {"energy": float(energy_semilinear(d, nl))}, []
    for direction in cfg.get("directions", ["-", "+"]):
        if direction not in ("-", "+"):
            raise ConfigError(f"direction {direction!r}")
        F = radiation_semilinear(nl, d, direction, T=float(cfg.get("T", 12.0)),
                                 route=cfg.get("route", "characteristic"))
        name = "backward.csv" if direction == "-" else "forward.csv"
        F.to_csv(out / name)
        res[f"norm_sq_{'minus' if direction == '-' else 'plus'}"] = F.norm() ** 2
        files.append(name)
    return res, files


def run_scatter(cfg, out: Path, base: Path):
    from .radiation import scattering_forward
    nl = _nonlinearity(cfg)
    F = _field(cfg.get("field", {"zero": True}), base)
    win = _window(cfg, F)
    A = scattering_forward(nl, F, win, tol=float(cfg.get("tol", 1e-12)),
                           max_iter=int(cfg.get("max_iter", 25)))
    A.to_csv(out / "scattered.csv")
    return {"input_norm": F.norm(), "output_norm": A.norm(),
            "inverse_iterations": A.meta.get("inverse_iterations"),
            "inverse_residuals": A.meta.get("inverse_residuals")}, ["scattered.csv"]


def run_expand(cfg, out: Path, base: Path):
    from .expansion import remainder_study
    from .grids_norms import write_csv
    nl = _nonlinearity(cfg)
    ups = [_field(s, base) for s in cfg.get("upsilons", [])]
    if len(ups) < 2:
        raise ConfigError("expand needs upsilons: [Y0, Y1, ...]")
    eps = [float(e) for e in cfg.get("eps", [0.2, 0.1, 0.05])]
    orders = [int(o) for o in cfg.get("orders", [4])]
    reps = remainder_study(nl, ups, eps, order=orders, T=float(cfg.get("T", 10.0)))
    res, files = {"orders": {}}, []
    for r in reps:
        res["orders"][str(r.order)] = {"eps": r.eps.tolist(), "delta": r.delta.tolist(),
                                       "slope": r.slope}
        name = f"remainder_order{r.order}.csv"
        write_csv(out / name, {"eps": r.eps, "delta": r.delta})
        files.append(name)
    res["slope"] = reps[-1].slope
    res["backward_error"] = reps[0].meta["backward_error"]
    return res, files


def run_geometry(cfg, out: Path, base: Path):
    np = _np()
    from .conormal_geometry import (on_cones, quadruple_interaction_geometry,
                                    triple_interaction_geometry)
    g = cfg.get("geometry", {})
    kind = g.get("type", "triple")
    a, b, s_star = float(g.get("a", 1.0)), float(g.get("b", 1.0)), float(g.get("s_star", 0.0))
    if kind == "triple":
        tg = triple_interaction_geometry(a, b, s_star)
        x3 = np.linspace(-2, 2, int(g.get("n_gamma", 41)))
        pts = np.vstack([tg.gamma(x3, -1), tg.gamma(x3, 1)])
        Q = tg.q_inf(g.get("x30", [0.0]), int(g.get("n_phi", 64)))
        cones = tg.cones()
    elif kind == "quadruple":
        qg = quadruple_interaction_geometry(a, b, float(g.get("c", 1.0)), s_star)
        pts = np.vstack([qg.gamma(-1), qg.gamma(1)])
        Q = qg.q_inf(-1, int(g.get("n", 200)))
        cones = qg.cones()
    else:
        raise ConfigError(f"geometry type {kind!r}")
    Q.to_csv(out / "q_inf.csv")
    return {"type": kind, "gamma_on_cones": float(on_cones(pts, cones).max()),
            "q_inf_residual": Q.max_residual(), "q_inf_points": int(Q.points.shape[0])}, \
        ["q_inf.csv"]


def run_recover(cfg, out: Path, base: Path):
    np = _np()
    from .grids_norms import write_csv
    mode = cfg.get("mode", "reconstruct")
    if mode == "reconstruct":
        from .recovery import reconstruct_f_from_third_derivative
        nl_true = _nonlinearity(cfg)
        g = cfg.get("grid", {})
        U, n = float(g.get("u_max", 1.0)), int(g.get("n", 10000))
        u = np.linspace(-U, U, n)
        nl = reconstruct_f_from_third_derivative(u, nl_true.derivatives[3](u))
        f_rec, f_true = nl.derivatives[0](u), nl_true.derivatives[0](u)
        write_csv(out / "reconstruction.csv", {"u": u, "f": f_rec, "f_true": f_true})
        return {"sup_error": float(np.max(np.abs(f_rec - f_true)))}, ["reconstruction.csv"]
    if mode in ("triple", "quadruple"):
        return _run_detect(cfg, out, base, mode)
    raise ConfigError(f"recover mode {mode!r}")


def _run_detect(cfg, out: Path, base: Path, mode: str):
    np = _np()
    from .conormal_geometry import plane_patterns, quadruple_config, triple_config
    from .recovery import InteractionConfig, SingularityProbe, detect_new_singularities, run_interaction
    nl = _nonlinearity(cfg)
    Y0 = _field(cfg.get("background"), base)
    g = cfg.get("grid", {})
    if mode == "triple":
        cones, top = triple_config(1.0, 1.0, 0.0), (1, 1, 1)
        omega, s_q, L, t0 = np.array([1.0, 1.0, 0.0]), -2 * np.sqrt(2), 6.0, -2.6
    else:
        cones, top = quadruple_config(1.0, 1.0, 1.0, 0.0), (1, 1, 1, 1)
        omega, s_q, L, t0 = np.array([1.0, 1.0, 1.0]), -2 * np.sqrt(3), 6.3, -2.9
    ic = InteractionConfig(cones, n=int(g.get("n", 160)), half_width=float(g.get("half_width", L)),
                           t_start=t0, t_end=4.6, record=[top], probe_directions=[omega],
                           zero_waves=tuple(cfg.get("zero_waves", ())))
    res = run_interaction(nl, Y0, ic)
    s = np.arange(-6.0 if mode == "triple" else -6.2, -0.7, 0.0125)
    Xi = res.field(top, s, radius=float(cfg.get("radius", 3.5)))
    Xi.to_csv(out / "xi_top.csv")
    probe = SingularityProbe(omega / np.linalg.norm(omega), s_q)
    rep = detect_new_singularities(Xi, probe, plane_patterns(cones, 50))
    return {**rep.as_row(), "off": rep.off, "extraction_residual": Xi.meta["residual"],
            **res.meta}, ["xi_top.csv"]


PIPELINES = {"validate": run_validate, "solve": run_solve, "radiate": run_radiate,
             "scatter": run_scatter, "expand": run_expand, "geometry": run_geometry,
             "recover": run_recover}


# ---------------------------------------------------------------------------


def _jsonable(obj):
    np = _np()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _versions() -> dict:
    import numpy
    import scipy
    from . import BACKEND, __version__
    return {"wavescatter": __version__, "backend": BACKEND, "python": platform.python_version(),
            "numpy": numpy.__version__, "scipy": scipy.__version__}


def run(config_path: str, out_dir: str) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config_path": str(config_path), "complete": False}
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        cfg = load_config(config_path)
        manifest["config"] = cfg
        from .errors import ConfigurationError, NumericalGuardError, PreconditionError
        manifest["versions"] = _versions()
        try:
            results, files = PIPELINES[cfg["kind"]](cfg, out, Path(config_path).resolve().parent)
        except (PreconditionError, ConfigurationError, ConfigError) as exc:
            raise ConfigError(str(exc)) from exc
        except NumericalGuardError as exc:
            manifest["error"] = {"type": "numerical_guard", "message": str(exc)}
            code = EXIT_GUARD
        else:
            manifest["results"] = _jsonable(results)
            manifest["outputs"] = files
            manifest["complete"] = True
    except ConfigError as exc:
        manifest["error"] = {"type": "precondition", "message": str(exc)}
        code = EXIT_PRECONDITION
    manifest["runtime_s"] = time.perf_counter() - t0
    manifest["exit_code"] = code
    with open(out / "manifest.json", "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
    if code != EXIT_OK:
        print(f"wavescatter: {manifest['error']['message']}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="wavescatter", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="JSON run config (schema 1)")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    args = ap.parse_args(argv)
    if args.threads < 1:
        ap.error("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(args.threads)
    return run(args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
