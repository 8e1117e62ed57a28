"""Leapfrog solvers for linear, potential and semilinear wave equations.

Radial problems are reduced to w = r*u on r >= 0 with w(t, 0) = 0, so that

    w_tt - w_rr = r * (forcing) ,

and are stepped by the three-point leapfrog scheme.  At unit CFL number
(dt = dr) the homogeneous scheme is the exact d'Alembert transport on the
characteristic lattice, and the outflow condition w^{n+1}_N = w^n_{N-1} is
exact for outgoing waves.  At unit CFL the second time level is built with
the exact d'Alembert average and a Simpson rule for the velocity,

    w^{+-1} = A w^0 +- dt * M (r psi) + dt^2/2 * S^0 ,

A the neighbour average and M = tridiag(1, 4, 1)/6; the inverse map
r psi = M^{-1} (w^{+1} - w^{-1}) / (2 dt) is used for every reported d_t u.
This keeps free solutions fourth-order accurate in d_t u and makes the map
between Cauchy data and time levels a bijection.

The 3D solver is the standard 7-point leapfrog with either periodic or
first-order absorbing faces.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _backend
from .errors import ConfigurationError, NumericalGuardError, TruncationWarning
from .grids_norms import (CauchyData, Grid3D, RadialGrid, SpacetimeTrajectory,
                          origin_value, pade_mass_apply, pade_mass_solve)
from .nonlinearity import Nonlinearity

__all__ = [
    "SolverConfig",
    "RadialScheme",
    "Stepper3D",
    "solve_linear_radial",
    "solve_semilinear_radial",
    "solve_potential_radial",
    "solve_semilinear_3d",
]

RADIAL_BOUNDARIES = ("outflow-at-r_max", "reflecting-origin")
CUBE_BOUNDARIES = ("outflow-3d", "periodic-3d")


@dataclass(frozen=True)
class SolverConfig:
    """Time stepping parameters.

    ``time_step`` defaults to ``cfl_ratio`` times the largest stable step
    (dr in 1D, h/sqrt(3) in 3D).  The radial solvers always reflect oddly at
    r = 0 and use an outflow condition at r_max.
    """

    end_time: float
    cfl_ratio: float = 1.0
    time_step: float | None = None
    boundary: str = "outflow-at-r_max"
    snapshot_stride: int = 1
    blowup_threshold: float = 1e6
    max_snapshot_bytes: int = 1 << 31

    def __post_init__(self):
        if not 0 < self.cfl_ratio <= 1:
            raise ConfigurationError("cfl_ratio must lie in (0, 1]")
        if self.end_time < 0:
            raise ConfigurationError("end_time must be nonnegative")
        if self.snapshot_stride < 1:
            raise ConfigurationError("snapshot_stride must be >= 1")
        if self.boundary not in RADIAL_BOUNDARIES + CUBE_BOUNDARIES:
            raise ConfigurationError(f"unknown boundary {self.boundary!r}")

    def step_for(self, spacing: float, dim: int) -> float:
        limit = spacing / np.sqrt(dim)
        dt = self.cfl_ratio * limit if self.time_step is None else float(self.time_step)
        if dt <= 0 or dt > self.cfl_ratio * limit * (1 + 1e-12):
            raise ConfigurationError(
                f"time step {dt:g} violates CFL bound {self.cfl_ratio * limit:g}")
        return dt

    def n_steps(self, dt: float) -> int:
        return int(np.ceil(self.end_time / dt - 1e-9))


# ---------------------------------------------------------------------------
# radial scheme


class RadialScheme:
    """Leapfrog for w = r*u on nodes r_i = i*dr, i = 0..N."""

    def __init__(self, n_nodes: int, dr: float, dt: float, kernels=None):
        self.n = n_nodes
        self.dr = dr
        self.dt = dt
        self.lam = dt / dr
        self.unit = abs(self.lam - 1.0) < 1e-12
        self.r = np.arange(n_nodes) * dr
        self._k = kernels or _backend.kernels

    def levels_from_data(self, w0: np.ndarray, w1: np.ndarray,
                         S0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Levels -1 and +1 from w0 = r*phi, w1 = r*psi and the source at t = 0."""
        dt = self.dt
        if self.unit:
            avg = np.zeros_like(w0)
            avg[1:-1] = 0.5 * (w0[2:] + w0[:-2])
            avg[-1] = 0.5 * w0[-2]
            vel = dt * pade_mass_apply(w1, "odd")
            half = 0.5 * dt * dt * S0
        else:
            lap = np.zeros_like(w0)
            lap[1:-1] = (w0[2:] - 2 * w0[1:-1] + w0[:-2]) / self.dr**2
            lap[-1] = (w0[-2] - 2 * w0[-1]) / self.dr**2
            avg = w0 + 0.5 * dt * dt * lap
            vel = dt * w1
            half = 0.5 * dt * dt * S0
        wm = avg - vel + half
        wp = avg + vel + half
        wm[0] = wp[0] = 0.0
        return wm, wp

    def velocity(self, w_prev: np.ndarray, w_next: np.ndarray) -> np.ndarray:
        """d_t w at the middle level from its two neighbours."""
        diff = (w_next - w_prev) / (2.0 * self.dt)
        if self.unit:
            return pade_mass_solve(diff, "odd")
        return diff

    def data_from_levels(self, w_prev, w_cur, w_next) -> tuple[np.ndarray, np.ndarray]:
        """(u, d_t u) at the middle level."""
        return self.to_u(w_cur), self.to_u(self.velocity(w_prev, w_next))

    def to_u(self, w: np.ndarray) -> np.ndarray:
        u = np.empty_like(w)
        u[1:] = w[1:] / self.r[1:]
        u[0] = origin_value(w, self.dr)
        return u

    def step(self, w_prev: np.ndarray, w_cur: np.ndarray, S: np.ndarray,
             out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty_like(w_cur)
        self._k.leapfrog1d(w_prev, w_cur, S, out, self.lam**2, self.dt**2)
        out[0] = 0.0
        out[-1] = w_cur[-1] - self.lam * (w_cur[-1] - w_cur[-2])
        return out


def _time_samples(spec, t: float, r: np.ndarray, n: int) -> np.ndarray:
    """Evaluate a space-time field given as callable(t, r) or array indexed by step."""
    if spec is None:
        return np.zeros_like(r)
    if callable(spec):
        return np.asarray(spec(t, r), dtype=float) * np.ones_like(r)
    arr = np.asarray(spec, dtype=float)
    row = arr[n]
    if row.size == r.size - 1:  # grid without the origin node
        row = np.concatenate([[row[0]], row])
    return row


def _radial_setup(d: CauchyData, cfg: SolverConfig):
    if not isinstance(d.grid, RadialGrid):
        raise ConfigurationError("radial solver needs radial Cauchy data")
    if cfg.boundary not in RADIAL_BOUNDARIES:
        raise ConfigurationError(f"boundary {cfg.boundary!r} is not a radial boundary")
    g = d.grid
    dt = cfg.step_for(g.dr, 1)
    scheme = RadialScheme(g.n_points + 1, g.dr, dt)
    return g, scheme


def _march_radial(d: CauchyData, cfg: SolverConfig, source: Callable[[np.ndarray, int], np.ndarray],
                  guard: bool, label: str) -> SpacetimeTrajectory:
    g, sch = _radial_setup(d, cfg)
    r = sch.r
    w0 = r * g.full(d.phi)
    w1 = r * g.full(d.psi)
    nsteps = cfg.n_steps(sch.dt)
    stride = cfg.snapshot_stride
    nsnap = nsteps // stride + 1
    if 2 * nsnap * r.size * 8 > cfg.max_snapshot_bytes:
        raise ConfigurationError("snapshot storage exceeds max_snapshot_bytes; raise snapshot_stride")
    U = np.empty((nsnap, g.size))
    UT = np.empty((nsnap, g.size))
    sl = slice(0, None) if g.include_origin else slice(1, None)
    prev, cur = None, w0
    wm, nxt = sch.levels_from_data(w0, w1, source(w0, 0))
    prev = wm
    edge_tol = 1e-10 * max(np.abs(w0).max(), np.abs(w1).max() * sch.dt, 1e-300)
    warned = False
    k = 0
    for n in range(nsteps + 1):
        if n > 0:
            prev, cur = cur, nxt
            nxt = sch.step(prev, cur, source(cur, n))
        if guard:
            umax = np.abs(cur[1:] / r[1:]).max() if r.size > 1 else 0.0
            if not np.isfinite(umax) or umax > cfg.blowup_threshold:
                raise NumericalGuardError(
                    f"{label}: |u| = {umax:.3e} exceeds {cfg.blowup_threshold:g} at t = {n * sch.dt:g}",
                    {"step": n, "time": n * sch.dt, "max_abs_u": float(umax)})
        if not warned and abs(cur[-2]) > edge_tol and n * sch.dt < cfg.end_time:
            warnings.warn(f"{label}: solution reached r_max at t = {n * sch.dt:g}", TruncationWarning)
            warned = True
        if n % stride == 0:
            u, ut = sch.data_from_levels(prev, cur, nxt)
            U[k], UT[k] = u[sl], ut[sl]
            k += 1
    times = np.arange(nsnap) * stride * sch.dt
    return SpacetimeTrajectory(times, U, UT, g, {"solver": label, "dt": sch.dt,
                                                  "backend": _backend.BACKEND})


def solve_linear_radial(d: CauchyData, cfg: SolverConfig, forcing=None) -> SpacetimeTrajectory:
    """Free (or forced) radial wave equation u_tt - Delta u = forcing.

    ``forcing`` is a callable (t, r) -> array or an array of shape
    (n_steps + 1, n_nodes) sampled at t_n = n*dt.
    """
    if forcing is None:
        src = lambda w, n: np.zeros_like(w)  # noqa: E731
    else:
        r = np.arange(d.grid.n_points + 1) * d.grid.dr
        dt = cfg.step_for(d.grid.dr, 1)
        src = lambda w, n: r * _time_samples(forcing, n * dt, r, n)  # noqa: E731
    return _march_radial(d, cfg, src, False, "linear_radial")


def semilinear_source(nl: Nonlinearity, r: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """S(w) = -r f(w/r) with S(0) = 0; u at r = dr is the exact ratio w/r."""
    f = nl.derivatives[0]
    rr = r[1:]

    def S(w):
        out = np.zeros_like(w)
        out[1:] = -rr * f(w[1:] / rr)
        return out

    return S


def solve_semilinear_radial(nl: Nonlinearity, d: CauchyData, cfg: SolverConfig) -> SpacetimeTrajectory:
    """u_tt - Delta u + f(u) = 0 for radial data; aborts if |u| exceeds the guard."""
    r = np.arange(d.grid.n_points + 1) * d.grid.dr
    S = semilinear_source(nl, r)
    return _march_radial(d, cfg, lambda w, n: S(w), True, "semilinear_radial")


def solve_potential_radial(V, g, d: CauchyData, cfg: SolverConfig) -> SpacetimeTrajectory:
    """u_tt - Delta u + V u = g for radial V, g (callables of (t, r) or step-indexed arrays)."""
    r = np.arange(d.grid.n_points + 1) * d.grid.dr
    dt = cfg.step_for(d.grid.dr, 1)

    def src(w, n):
        t = n * dt
        out = r * _time_samples(g, t, r, n)
        if V is not None:
            out -= _time_samples(V, t, r, n) * w
        out[0] = 0.0
        return out

    return _march_radial(d, cfg, src, True, "potential_radial")


# ---------------------------------------------------------------------------
# 3D


class Stepper3D:
    """Seven-point leapfrog on a :class:`Grid3D` with periodic or absorbing faces."""

    def __init__(self, grid: Grid3D, dt: float, boundary: str = "outflow-3d", kernels=None):
        if boundary not in CUBE_BOUNDARIES:
            raise ConfigurationError(f"boundary {boundary!r} is not a 3D boundary")
        self.grid = grid
        self.dt = dt
        self.lam = dt / grid.h
        if self.lam > 1 / np.sqrt(3) * (1 + 1e-12):
            raise ConfigurationError("3D CFL condition dt <= h/sqrt(3) violated")
        self.periodic = boundary == "periodic-3d"
        self._k = kernels or _backend.kernels

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        h2 = self.grid.h ** 2
        if self.periodic:
            lap = -6.0 * u
            for ax in range(3):
                lap += np.roll(u, 1, axis=ax) + np.roll(u, -1, axis=ax)
            return lap / h2
        p = np.pad(u, 1)
        return (p[2:, 1:-1, 1:-1] + p[:-2, 1:-1, 1:-1] + p[1:-1, 2:, 1:-1] + p[1:-1, :-2, 1:-1]
                + p[1:-1, 1:-1, 2:] + p[1:-1, 1:-1, :-2] - 6.0 * u) / h2

    def start(self, phi: np.ndarray, psi: np.ndarray, source0: np.ndarray | None):
        """Taylor start: levels -1 and +1 from (phi, psi) and the source at t = 0."""
        acc = self.laplacian(phi)
        if source0 is not None:
            acc = acc + source0
        half = 0.5 * self.dt**2 * acc
        return phi - self.dt * psi + half, phi + self.dt * psi + half

    def step(self, u_prev: np.ndarray, u: np.ndarray, source: np.ndarray | None,
             out: np.ndarray) -> np.ndarray:
        self._k.leapfrog3d(u_prev, u, source, out, self.lam**2, self.dt**2, self.periodic)
        if not self.periodic:
            lam = self.lam
            out[0] = u[0] - lam * (u[0] - u[1])
            out[-1] = u[-1] - lam * (u[-1] - u[-2])
            out[:, 0] = u[:, 0] - lam * (u[:, 0] - u[:, 1])
            out[:, -1] = u[:, -1] - lam * (u[:, -1] - u[:, -2])
            out[:, :, 0] = u[:, :, 0] - lam * (u[:, :, 0] - u[:, :, 1])
            out[:, :, -1] = u[:, :, -1] - lam * (u[:, :, -1] - u[:, :, -2])
        return out


def solve_semilinear_3d(nl: Nonlinearity, d: CauchyData, cfg: SolverConfig) -> SpacetimeTrajectory:
    """u_tt - Delta u + f(u) = 0 on the cube, snapshots every ``snapshot_stride`` steps."""
    if not isinstance(d.grid, Grid3D):
        raise ConfigurationError("solve_semilinear_3d needs data on a Grid3D")
    boundary = cfg.boundary if cfg.boundary in CUBE_BOUNDARIES else "outflow-3d"
    grid = d.grid
    dt = cfg.step_for(grid.h, 3)
    stepper = Stepper3D(grid, dt, boundary)
    nsteps = cfg.n_steps(dt)
    stride = cfg.snapshot_stride
    nsnap = nsteps // stride + 1
    if 2 * nsnap * grid.n**3 * 8 > cfg.max_snapshot_bytes:
        raise ConfigurationError(
            f"{nsnap} snapshots of {grid.n}^3 exceed max_snapshot_bytes; raise snapshot_stride")
    f = nl.derivatives[0]
    U = np.empty((nsnap,) + grid.shape)
    UT = np.empty((nsnap,) + grid.shape)
    cur = d.phi.copy()
    prev, nxt = stepper.start(d.phi, d.psi, -f(d.phi))
    k = 0
    for n in range(nsteps + 1):
        if n > 0:
            prev, cur, nxt = cur, nxt, prev
            stepper.step(prev, cur, -f(cur), nxt)
        umax = float(np.abs(cur).max())
        if not np.isfinite(umax) or umax > cfg.blowup_threshold:
            raise NumericalGuardError(f"semilinear_3d: |u| = {umax:.3e} at t = {n * dt:g}",
                                      {"step": n, "time": n * dt, "max_abs_u": umax})
        if n % stride == 0:
            U[k] = cur
            UT[k] = (nxt - prev) / (2 * dt)
            k += 1
    times = np.arange(nsnap) * stride * dt
    return SpacetimeTrajectory(times, U, UT, grid, {"solver": "semilinear_3d", "dt": dt,
                                                     "backend": _backend.BACKEND})
