"""Grids, field containers, energies, space-time norms and the radial Radon transform.

Radial fields are sampled on r_i = i*dr.  Internally the energies work with
w = r*u, for which the 3D Laplacian becomes a 1D second derivative and the
gradient energy int |grad u|^2 4 pi r^2 dr equals 4 pi int w_r^2 dr.
Derivatives of w use the fourth-order compact (Pade) scheme

    (v_{i-1} + 4 v_i + v_{i+1}) / 6 = (w_{i+1} - w_{i-1}) / (2 dr)

with odd reflection at r = 0, which makes the discrete free energy an exact
invariant of the unit-CFL radial scheme in :mod:`wavescatter.wave_solver`.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np
from scipy.linalg import solve_banded

from .nonlinearity import Nonlinearity, antiderivative

__all__ = [
    "RadialGrid",
    "Grid3D",
    "CauchyData",
    "SpacetimeTrajectory",
    "NormReport",
    "RadonResult",
    "energy_linear",
    "energy_semilinear",
    "norm_lplq",
    "is_strichartz_admissible",
    "radon_radial",
    "write_csv",
    "write_binary",
    "read_binary",
]


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid with spacing dr = r_max / n_points.

    With ``include_origin`` the nodes are r = 0, dr, ..., r_max (n_points + 1
    values), otherwise dr, ..., r_max.
    """

    r_max: float
    n_points: int
    include_origin: bool = True
    direction: tuple | None = None  # set when the grid samples a ray r*omega

    def __post_init__(self):
        if self.r_max <= 0 or self.n_points <= 0:
            raise ValueError("RadialGrid needs r_max > 0 and n_points > 0")

    @property
    def dr(self) -> float:
        return self.r_max / self.n_points

    @property
    def r(self) -> np.ndarray:
        start = 0 if self.include_origin else 1
        return np.arange(start, self.n_points + 1) * self.dr

    @property
    def size(self) -> int:
        return self.n_points + (1 if self.include_origin else 0)

    @property
    def shape(self) -> tuple:
        return (self.size,)

    def full(self, values: np.ndarray) -> np.ndarray:
        """Values on r = 0..r_max; the origin value is filled with 0 if absent."""
        values = np.asarray(values, dtype=float)
        if self.include_origin:
            return values
        return np.concatenate([np.zeros(values.shape[:-1] + (1,)), values], axis=-1)


@dataclass(frozen=True)
class Grid3D:
    """Periodic-style lattice x_i = -L + i*h, i = 0..n-1, on the cube [-L, L]^3."""

    half_width: float
    n: int

    def __post_init__(self):
        if self.half_width <= 0 or self.n <= 0:
            raise ValueError("Grid3D needs half_width > 0 and n > 0")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def x(self) -> np.ndarray:
        return -self.half_width + np.arange(self.n) * self.h

    @property
    def shape(self) -> tuple:
        return (self.n, self.n, self.n)

    def mesh(self, sparse: bool = True):
        return np.meshgrid(self.x, self.x, self.x, indexing="ij", sparse=sparse)

    def radius(self) -> np.ndarray:
        X, Y, Z = self.mesh()
        return np.sqrt(X * X + Y * Y + Z * Z)


Grid = RadialGrid | Grid3D


@dataclass(frozen=True)
class CauchyData:
    """Initial data (phi, psi) = (u, d_t u) at t = 0 on a radial or cubic grid."""

    phi: np.ndarray
    psi: np.ndarray
    grid: Grid
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        psi = np.asarray(self.psi, dtype=float)
        if phi.shape != psi.shape or phi.shape != tuple(self.grid.shape):
            raise ValueError(f"phi {phi.shape}, psi {psi.shape} and grid {self.grid.shape} disagree")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(psi))):
            raise ValueError("Cauchy data must be finite")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)

    @property
    def is_radial(self) -> bool:
        return isinstance(self.grid, RadialGrid)

    @classmethod
    def zeros(cls, grid: Grid) -> "CauchyData":
        return cls(np.zeros(grid.shape), np.zeros(grid.shape), grid)

    def scaled(self, lam: float) -> "CauchyData":
        return CauchyData(lam * self.phi, lam * self.psi, self.grid)


@dataclass
class SpacetimeTrajectory:
    """Snapshots u(t_n, .) and d_t u(t_n, .) on a fixed grid at uniform times."""

    times: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    grid: Grid
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.u.shape != self.ut.shape or self.u.shape[0] != self.times.size:
            raise ValueError("trajectory arrays disagree in shape")
        if self.times.size > 2:
            dt = np.diff(self.times)
            if np.ptp(dt) > 1e-9 * max(abs(dt[0]), 1e-300):
                raise ValueError("trajectory times must be uniformly spaced")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def snapshot(self, n: int) -> CauchyData:
        return CauchyData(self.u[n], self.ut[n], self.grid)

    def __len__(self) -> int:
        return self.times.size


# ---------------------------------------------------------------------------
# compact differences on odd radial profiles


def _pade_matrix(n: int, parity: str) -> np.ndarray:
    """Banded form of (v_{i-1} + 4 v_i + v_{i+1})/6 with reflection at i = 0."""
    ab = np.zeros((3, n))
    ab[0, 1:] = 1.0 / 6.0
    ab[1, :] = 4.0 / 6.0
    ab[2, :-1] = 1.0 / 6.0
    if parity == "even":
        ab[0, 1] = 2.0 / 6.0  # v_{-1} = v_1
    elif parity == "odd":
        ab[0, 1] = 0.0  # v_{-1} = -v_1 cancels v_1 in row 0
    else:
        raise ValueError(parity)
    return ab


def pade_mass_solve(rhs: np.ndarray, parity: str) -> np.ndarray:
    """Solve M v = rhs along the last axis, M = tridiag(1, 4, 1)/6."""
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[-1]
    ab = _pade_matrix(n, parity)
    flat = rhs.reshape(-1, n).T
    sol = solve_banded((1, 1), ab, flat, check_finite=False)
    return sol.T.reshape(rhs.shape)


def pade_mass_apply(v: np.ndarray, parity: str) -> np.ndarray:
    """M v along the last axis (values beyond the outer node are zero)."""
    v = np.asarray(v, dtype=float)
    out = 4.0 * v
    out[..., 1:] += v[..., :-1]
    out[..., :-1] += v[..., 1:]
    out[..., 0] += v[..., 1] if parity == "even" else -v[..., 1]
    return out / 6.0


def compact_dr(w: np.ndarray, dr: float) -> np.ndarray:
    """Fourth-order derivative of an odd radial profile w (w(0) = 0) on r = i*dr."""
    w = np.asarray(w, dtype=float)
    rhs = np.empty_like(w)
    rhs[..., 1:-1] = (w[..., 2:] - w[..., :-2]) / (2 * dr)
    rhs[..., 0] = w[..., 1] / dr
    rhs[..., -1] = -w[..., -2] / (2 * dr)
    return pade_mass_solve(rhs, "even")


def origin_value(w: np.ndarray, dr: float) -> np.ndarray:
    """u(0) = d_r w(0) by the one-sided second-order stencil."""
    return (4.0 * w[..., 1] - w[..., 2]) / (2.0 * dr)


def trapezoid_weights(n: int, dr: float) -> np.ndarray:
    wts = np.full(n, dr)
    wts[0] *= 0.5
    wts[-1] *= 0.5
    return wts


def _check_grid(d: CauchyData) -> None:
    if d.phi.shape != tuple(d.grid.shape):
        raise ValueError("mismatched grids")


def _radial_w(d: CauchyData) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    g = d.grid
    r = np.arange(g.n_points + 1) * g.dr
    return r, r * g.full(d.phi), r * g.full(d.psi)


def _grad_sq_3d(phi: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(phi)
    for ax in range(3):
        p = np.pad(phi, [(1, 1) if a == ax else (0, 0) for a in range(3)])
        sl_hi = [slice(None)] * 3
        sl_lo = [slice(None)] * 3
        sl_hi[ax] = slice(2, None)
        sl_lo[ax] = slice(None, -2)
        out += ((p[tuple(sl_hi)] - p[tuple(sl_lo)]) / (2 * h)) ** 2
    return out


def energy_linear(d: CauchyData) -> float:
    """Free energy 1/2 int (psi^2 + |grad phi|^2) dx."""
    _check_grid(d)
    if d.is_radial:
        r, w0, w1 = _radial_w(d)
        wr = compact_dr(w0, d.grid.dr)
        wts = trapezoid_weights(r.size, d.grid.dr)
        return float(2.0 * np.pi * np.sum(wts * (w1 * w1 + wr * wr)))
    h = d.grid.h
    return float(0.5 * h**3 * np.sum(d.psi**2 + _grad_sq_3d(d.phi, h)))


def energy_semilinear(d: CauchyData, nl: Nonlinearity) -> float:
    """Conserved energy 1/2 int (psi^2 + |grad phi|^2) dx + int F(phi) dx."""
    lin = energy_linear(d)
    if d.is_radial:
        g = d.grid
        r = np.arange(g.n_points + 1) * g.dr
        F = np.asarray(antiderivative(nl, g.full(d.phi)), dtype=float)
        wts = trapezoid_weights(r.size, g.dr)
        return lin + float(4.0 * np.pi * np.sum(wts * F * r * r))
    F = np.asarray(antiderivative(nl, d.phi), dtype=float)
    return lin + float(d.grid.h**3 * np.sum(F))


# ---------------------------------------------------------------------------
# space-time Lebesgue norms


class NormReport(NamedTuple):
    value: float
    admissible: bool


def is_strichartz_admissible(p: float, q: float, tol: float = 1e-12) -> bool:
    """Energy-critical wave admissibility 1/p + 3/q = 1/2 with p >= 2 (p = inf allowed)."""
    inv_p = 0.0 if np.isinf(p) else 1.0 / p
    return bool(abs(inv_p + 3.0 / q - 0.5) <= tol and (np.isinf(p) or p >= 2))


def _spatial_weights(grid: Grid) -> np.ndarray:
    if isinstance(grid, RadialGrid):
        r = grid.r
        w = np.full(r.size, grid.dr)
        if grid.include_origin:
            w[0] *= 0.5
        w[-1] *= 0.5
        return 4.0 * np.pi * r * r * w
    return np.full(grid.shape, grid.h**3)


def norm_lplq(traj: SpacetimeTrajectory, p: float, q: float) -> NormReport:
    """(int (int |u|^q dx)^{p/q} dt)^{1/p} by trapezoidal quadrature in x and t."""
    if not (p > 0 and q > 0):
        raise ValueError("p and q must be positive")
    wx = _spatial_weights(traj.grid)
    axes = tuple(range(1, traj.u.ndim))
    inner = np.sum(wx * np.abs(traj.u) ** q, axis=axes) ** (1.0 / q)
    if np.isinf(p):
        val = float(inner.max()) if inner.size else 0.0
    elif inner.size == 1:
        val = float(inner[0])
    else:
        wt = trapezoid_weights(inner.size, traj.dt)
        val = float(np.sum(wt * inner**p) ** (1.0 / p))
    return NormReport(val, is_strichartz_admissible(p, q))


# ---------------------------------------------------------------------------
# Radon transform of radial functions


class RadonResult(NamedTuple):
    values: np.ndarray
    truncated: bool


def radon_radial(g: np.ndarray, s, grid: RadialGrid, tail_tol: float = 1e-12) -> RadonResult:
    """Plane integral of a radial function, Rg(s) = 2 pi int_{|s|}^inf g(rho) rho d rho.

    Trapezoidal on the grid nodes, with the partial cell next to |s| handled
    by linear interpolation of rho*g.  Values with |s| > r_max are zero and set
    the truncation flag, as does a profile that has not decayed at r_max.
    """
    r = np.arange(grid.n_points + 1) * grid.dr
    gg = grid.full(np.asarray(g, dtype=float))
    if not grid.include_origin:
        gg = gg.copy()
        gg[0] = gg[1]  # rho*g vanishes at 0 regardless
    h = r * gg
    # tail[k] = int_{r_k}^{r_max} rho g
    cell = 0.5 * grid.dr * (h[1:] + h[:-1])
    tail = np.concatenate([np.cumsum(cell[::-1])[::-1], [0.0]])
    s_arr = np.abs(np.atleast_1d(np.asarray(s, dtype=float)))
    out = np.zeros_like(s_arr)
    inside = s_arr <= r[-1]
    a = s_arr[inside]
    k = np.minimum((a / grid.dr).astype(int), grid.n_points - 1)
    frac = a / grid.dr - k
    h_at = (1 - frac) * h[k] + frac * h[k + 1]
    partial = 0.5 * (r[k + 1] - a) * (h_at + h[k + 1])
    out[inside] = 2.0 * np.pi * (partial + tail[k + 1])
    truncated = bool(np.any(~inside) or abs(gg[-1]) > tail_tol * max(np.abs(gg).max(), 1e-300))
    vals = out if np.ndim(s) else out[0]
    return RadonResult(vals, truncated)


# ---------------------------------------------------------------------------
# serialization


def write_csv(path: str | os.PathLike, columns: Mapping[str, np.ndarray]) -> None:
    """Write equal-length columns with a header row, full double precision."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float).ravel() for n in names])
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def write_binary(path: str | os.PathLike, values: np.ndarray) -> None:
    """Little-endian uint64 count followed by float64 values in row-major order."""
    arr = np.ascontiguousarray(values, dtype="<f8").ravel()
    with open(path, "wb") as fh:
        fh.write(np.uint64(arr.size).astype("<u8").tobytes())
        fh.write(arr.tobytes())


def read_binary(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        count = int(np.frombuffer(fh.read(8), dtype="<u8")[0])
        data = np.frombuffer(fh.read(8 * count), dtype="<f8")
    if data.size != count:
        raise ValueError(f"{path}: expected {count} values, found {data.size}")
    return data.copy()
