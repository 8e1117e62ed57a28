"""Conormal spherical waves, interaction geometry and transport coefficients.

Conventions (points of null infinity are (s, omega), s = t - r along outgoing
rays and s = t + r along incoming rays):

* wave j has profile G(x) = x_+^m chi(x / width); the incoming member
  zeta_j^- = G(t - s_j + |z - z_j|) / |z - z_j| collapses on z_j at t = s_j;
* its backward field is Y_j(s, w) = G'(s - s_j - <w, z_j>);
* a forward light cone with vertex (t0, p) lands on {s = t0 - <w, p>}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalGuardError, PreconditionError
from .grids_norms import RadialGrid, SpacetimeTrajectory
from .radiation import RadiationFieldData

SMOOTHSTEP_ORDER = 7


def smoothstep(x: np.ndarray, order: int = SMOOTHSTEP_ORDER) -> np.ndarray:
    """Generalized smoothstep S_N on [0, 1], clamped outside; C^N at both ends."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    N = order
    poly = sum(comb(N + n, n) * comb(2 * N + 1, N - n) * (-x) ** n for n in range(N + 1))
    return x ** (N + 1) * poly


def cutoff(x: np.ndarray, width: float = 1.0) -> np.ndarray:
    """Even bump equal to 1 on |x| <= width/2 and supported in [-width, width]."""
    y = 2.0 - 2.0 * np.abs(np.asarray(x, dtype=float)) / width
    return smoothstep(y)


def _cutoff_d(x: np.ndarray, width: float) -> np.ndarray:
    """Derivative of :func:`cutoff` (analytic, via the smoothstep polynomial)."""
    x = np.asarray(x, dtype=float)
    y = 2.0 - 2.0 * np.abs(x) / width
    N = SMOOTHSTEP_ORDER
    inside = (y > 0) & (y < 1)
    yy = np.where(inside, y, 0.0)
    # d/dy S_N(y) = (2N+1) C(2N, N) y^N (1-y)^N
    dS = (2 * N + 1) * comb(2 * N, N) * yy**N * (1 - yy) ** N
    return np.where(inside, dS * (-2.0 * np.sign(x) / width), 0.0)


@dataclass(frozen=True)
class ConeConfig:
    vertices: np.ndarray
    emission_times: np.ndarray
    m: float = 2.0
    width: float = 1.0

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        s = np.atleast_1d(np.asarray(self.emission_times, dtype=float))
        if z.shape[1] != 3 or z.shape[0] != s.size:
            raise PreconditionError("need one 3-vector vertex per emission time")
        if not self.m > 0:
            raise PreconditionError("profile order m must be positive")
        if not self.width > 0:
            raise PreconditionError("cutoff width must be positive")
        object.__setattr__(self, "vertices", z)
        object.__setattr__(self, "emission_times", s)

    @property
    def n_waves(self) -> int:
        return self.emission_times.size

    def distinct(self) -> bool:
        z = self.vertices
        d = np.linalg.norm(z[:, None] - z[None], axis=-1)
        return bool(np.all(d[~np.eye(len(z), dtype=bool)] > 0))

    def profile(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.abs(x) ** self.m, 0.0) * cutoff(x, self.width)

    def profile_d(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xp = np.where(x > 0, x, 0.0)
        return (self.m * xp ** (self.m - 1) * cutoff(x, self.width)
                + xp**self.m * _cutoff_d(x, self.width))

    def shifted(self, delta: float) -> "ConeConfig":
        return ConeConfig(self.vertices, self.emission_times + delta, self.m, self.width)


def triple_config(a: float = 1.0, b: float = 1.0, s_star: float = 0.0, m: float = 2.0,
                  width: float = 1.0) -> ConeConfig:
    return ConeConfig([[0, 0, 0], [2 * a, 0, 0], [0, 2 * b, 0]], [s_star] * 3, m, width)


def quadruple_config(a: float = 1.0, b: float = 1.0, c: float = 1.0, s_star: float = 0.0,
                     m: float = 2.0, width: float = 1.0) -> ConeConfig:
    return ConeConfig([[0, 0, 0], [2 * a, 0, 0], [0, 2 * b, 0], [0, 0, 2 * c]],
                      [s_star] * 4, m, width)


def spherical_wave_eval(cfg: ConeConfig, j: int, t, z, direction: str = "-",
                        derivative: bool = False) -> np.ndarray:
    """zeta_j^-(t, z) = G(t - s_j + d)/d or zeta_j^+ = G(t - s_j - d)/d, d = |z - z_j|.

    ``z`` has shape (..., 3). With ``derivative`` returns the time derivative.
    """
    z = np.asarray(z, dtype=float)
    d = np.linalg.norm(z - cfg.vertices[j], axis=-1)
    if np.any(d == 0):
        raise PreconditionError("spherical wave evaluated at its vertex")
    sign = 1.0 if direction == "-" else -1.0
    if direction not in ("-", "+"):
        raise ValueError("direction must be '-' or '+'")
    x = np.asarray(t, dtype=float) - cfg.emission_times[j] + sign * d
    G = cfg.profile_d(x) if derivative else cfg.profile(x)
    return G / d


def upsilon(cfg: ConeConfig, j: int, s: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Closed-form backward field of zeta_j^-: G'(s - s_j - <omega, z_j>)."""
    s = np.asarray(s, dtype=float)
    om = np.asarray(omega, dtype=float)
    return cfg.profile_d(s - cfg.emission_times[j] - om @ cfg.vertices[j])


def upsilon_field(cfg: ConeConfig, j: int, s: np.ndarray, omega) -> RadiationFieldData:
    om = np.atleast_2d(np.asarray(omega, dtype=float))
    vals = np.stack([upsilon(cfg, j, s, o) for o in om], axis=1)
    return RadiationFieldData(np.asarray(s, dtype=float), vals, omegas=om, direction="-",
                              meta={"wave": j, "m": cfg.m})


def ray_trajectory(cfg: ConeConfig, j: int, omega, r: np.ndarray, times: np.ndarray,
                   direction: str = "-") -> SpacetimeTrajectory:
    """Closed-form zeta_j sampled along the ray z = r*omega (for extraction)."""
    om = np.asarray(omega, dtype=float)
    om = om / np.linalg.norm(om)
    r = np.asarray(r, dtype=float)
    z = r[:, None] * om[None, :]
    T = np.asarray(times, dtype=float)[:, None]
    u = spherical_wave_eval(cfg, j, T, z[None], direction)
    ut = spherical_wave_eval(cfg, j, T, z[None], direction, derivative=True)
    grid = RadialGrid(float(r[-1]), r.size - 1, include_origin=True, direction=tuple(om))
    if not np.allclose(grid.r, r):
        raise PreconditionError("ray samples must be uniform and start at r = 0")
    return SpacetimeTrajectory(np.asarray(times, dtype=float), u, ut, grid, {"wave": j})


# ---------------------------------------------------------------------------
# patterns at null infinity


def fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + 5**0.5) * k
    rho = np.sqrt(1 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


@dataclass
class PatternSet:
    """Sampled hypersurface of R_s x S^2 with its defining residual.

    ``points`` has columns (s, w1, w2, w3).
    """

    kind: str
    params: dict
    points: np.ndarray
    residual_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)

    def residual(self, s, omega) -> np.ndarray:
        return self.residual_fn(np.asarray(s, dtype=float), np.asarray(omega, dtype=float))

    def contains(self, s, omega, tol: float = 1e-9) -> np.ndarray:
        return np.abs(self.residual(s, omega)) <= tol

    def max_residual(self) -> float:
        if self.points.size == 0:
            return 0.0
        return float(np.max(np.abs(self.residual(self.points[:, 0], self.points[:, 1:]))))

    def to_csv(self, path) -> None:
        hdr = "s,omega1,omega2,omega3"
        np.savetxt(path, self.points, delimiter=",", header=hdr, comments="", fmt="%.17g")


def cone_pattern(t0: float, p, kind: str = "cone", n: int = 200, **params) -> PatternSet:
    """Landing set {s = t0 - <w, p>} of the forward light cone from (t0, p)."""
    p = np.asarray(p, dtype=float)
    om = fibonacci_sphere(n)
    s = t0 - om @ p
    return PatternSet(kind, dict(params, t0=t0, vertex=p.tolist()),
                      np.column_stack([s, om]),
                      lambda s_, w_: s_ - t0 + w_ @ p)


def plane_patterns(cfg: ConeConfig, n: int = 200) -> list[PatternSet]:
    """Sigma_{j,inf}^+ = {s - s_j + <w, z_j> = 0} for every wave."""
    return [cone_pattern(float(cfg.emission_times[j]), cfg.vertices[j], "plane", n, wave=j)
            for j in range(cfg.n_waves)]


@dataclass
class TripleGeometry:
    a: float
    b: float
    s_star: float

    @property
    def vertex_times(self):
        return self.s_star

    def t0(self, x30) -> np.ndarray:
        """Unshifted interaction time -(x30^2 + a^2 + b^2)^(1/2)."""
        return -np.sqrt(np.asarray(x30, dtype=float) ** 2 + self.a**2 + self.b**2)

    def gamma(self, x3, sign: int = -1) -> np.ndarray:
        """Points (t, x1, x2, x3) of Gamma^- (sign=-1) or Gamma^+ (sign=+1)."""
        x3 = np.atleast_1d(np.asarray(x3, dtype=float))
        t = self.s_star - sign * self.t0(x3)
        return np.column_stack([t, np.full_like(x3, self.a), np.full_like(x3, self.b), x3])

    def cones(self) -> ConeConfig:
        return triple_config(self.a, self.b, self.s_star)

    def q_direction(self, x30, phi) -> np.ndarray:
        """Unit ray directions of the flow-out from (a, b, x30); w3 = x30/t0."""
        x30 = np.asarray(x30, dtype=float)
        w3 = x30 / self.t0(x30)
        rho = np.sqrt(1 - w3**2)
        phi = np.asarray(phi, dtype=float)
        return np.stack(np.broadcast_arrays(rho * np.cos(phi), rho * np.sin(phi), w3), axis=-1)

    def q_minus(self, x30, phi, nu) -> np.ndarray:
        """Points (t, z) of Q^- along bicharacteristics: z = p + nu*w, t = s* + t0 + nu."""
        x30, phi, nu = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x30, phi, nu)))
        w = self.q_direction(x30, phi)
        p = np.stack([np.full_like(x30, self.a), np.full_like(x30, self.b), x30], axis=-1)
        z = p + nu[..., None] * w
        t = self.s_star + self.t0(x30) + nu
        return np.concatenate([t[..., None], z], axis=-1)

    def q_minus_at_radius(self, x30, phi, r) -> np.ndarray:
        """Point of Q^- on the sphere |z| = r for the bicharacteristic (x30, phi)."""
        w = self.q_direction(x30, phi)
        p = np.array([self.a, self.b, float(x30)])
        pw = float(p @ w)
        nu = -pw + np.sqrt(pw * pw - p @ p + r * r)
        return self.q_minus(x30, phi, nu)

    def q_inf(self, x30_values: Sequence[float] = (0.0,), n_phi: int = 64) -> PatternSet:
        """Closed form: s + <w, (a, b, x30)> = s* + t0, w3 = x30/t0."""
        rows = []
        for x30 in x30_values:
            phi = np.linspace(0, 2 * np.pi, n_phi, endpoint=False)
            w = self.q_direction(x30, phi)
            t0 = self.s_star + float(self.t0(x30))
            s = t0 - w @ np.array([self.a, self.b, x30])
            rows.append(np.column_stack([s, w]))
        a, b, ss = self.a, self.b, self.s_star

        def resid(s, w):
            w = np.atleast_2d(w)
            # x30 from w3 = x30/t0 with t0 = -(x30^2 + a^2 + b^2)^(1/2)
            w3 = np.clip(w[..., 2], -1 + 1e-15, 1 - 1e-15)
            x30 = -w3 * np.sqrt((a * a + b * b) / (1 - w3**2))
            t0 = -np.sqrt(x30**2 + a * a + b * b)
            return s + w[..., 0] * a + w[..., 1] * b + w[..., 2] * x30 - ss - t0

        return PatternSet("triple", {"a": a, "b": b, "s_star": ss,
                                     "x30": [float(v) for v in x30_values]},
                          np.vstack(rows), resid)


def triple_interaction_geometry(a: float, b: float, s_star: float = 0.0) -> TripleGeometry:
    """Geometry of three waves with vertices 0, (2a,0,0), (0,2b,0) and common time s*."""
    if not (a > 0 and b > 0):
        raise PreconditionError("a and b must be positive (cones are tangent otherwise)")
    return TripleGeometry(float(a), float(b), float(s_star))


@dataclass
class QuadrupleGeometry:
    a: float
    b: float
    c: float
    s_star: float

    @property
    def vertex(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def t0(self, sign: int = -1) -> float:
        return self.s_star + sign * float(np.linalg.norm(self.vertex))

    def gamma(self, sign: int = -1) -> np.ndarray:
        return np.concatenate([[self.t0(sign)], self.vertex])

    def cones(self) -> ConeConfig:
        return quadruple_config(self.a, self.b, self.c, self.s_star)

    def q_inf(self, sign: int = -1, n: int = 200) -> PatternSet:
        return cone_pattern(self.t0(sign), self.vertex, "quadruple", n, sign=sign)


def quadruple_interaction_geometry(a: float, b: float, c: float,
                                   s_star: float = 0.0) -> QuadrupleGeometry:
    if not (a > 0 and b > 0 and c > 0):
        raise PreconditionError("a, b, c must be positive")
    return QuadrupleGeometry(float(a), float(b), float(c), float(s_star))


def on_cones(points: np.ndarray, cfg: ConeConfig) -> np.ndarray:
    """| |z - z_j| - |t - s_j| | for every point (rows) and wave (columns)."""
    pts = np.atleast_2d(points)
    t, z = pts[:, 0], pts[:, 1:]
    d = np.linalg.norm(z[:, None, :] - cfg.vertices[None], axis=-1)
    return np.abs(d - np.abs(t[:, None] - cfg.emission_times[None]))


def radiation_pattern_of_surface(surface: Callable[[float], np.ndarray],
                                 radii: Sequence[float] = (1e2, 2e2, 4e2, 8e2, 1.6e3),
                                 tol: float = 1e-6, kind: str = "extrapolated") -> PatternSet:
    """Forward radiation pattern by extrapolating s = t - r and w = z/r to 1/r = 0.

    ``surface(r)`` returns points (t, z) on the surface with |z| = r, one row
    per label, with labels consistent across radii.
    """
    radii = np.asarray(radii, dtype=float)
    S, W = [], []
    for r in radii:
        pts = np.atleast_2d(surface(float(r)))
        S.append(pts[:, 0] - r)
        W.append(pts[:, 1:] / r)
    S, W = np.array(S), np.array(W)
    x = 1.0 / radii
    # polynomial extrapolation in 1/r through all radii
    V = np.vander(x, radii.size, increasing=True)
    coef_s = np.linalg.solve(V, S.reshape(radii.size, -1))
    coef_w = np.linalg.solve(V, W.reshape(radii.size, -1))
    s_inf = coef_s[0].reshape(S.shape[1:])
    w_inf = coef_w[0].reshape(W.shape[1:])
    # the same extrapolation without the largest radius estimates the error
    V2 = np.vander(x[:-1], radii.size - 1, increasing=True)
    s_alt = np.linalg.solve(V2, S[:-1].reshape(radii.size - 1, -1))[0].reshape(S.shape[1:])
    spread = float(np.max(np.abs(S[-1] - S[-2]))) if radii.size > 1 else 0.0
    err = float(np.max(np.abs(s_inf - s_alt)))
    if not np.all(np.isfinite(s_inf)) or (spread > 1.0 and err > 1.0):
        raise NumericalGuardError("s = t - r does not settle along the surface",
                                  {"spread": spread, "error": err})
    w_inf = w_inf / np.linalg.norm(w_inf, axis=-1, keepdims=True)
    pts = np.column_stack([s_inf, w_inf])

    def resid(s, w):
        raise NotImplementedError("extrapolated patterns are compared pointwise")

    return PatternSet(kind, {"radii": radii.tolist(), "error_estimate": err,
                             "tolerance": tol}, pts, resid)


# ---------------------------------------------------------------------------
# transport chain


@dataclass
class TransportCoefficients:
    r: np.ndarray
    beta: np.ndarray          # (K+1, ..., nr); beta[0] == 1
    gamma: np.ndarray         # (K, ..., nr) input coefficients
    m: float
    family: str
    rays: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _d2(b: np.ndarray, dr: float) -> np.ndarray:
    out = np.empty_like(b)
    out[..., 1:-1] = (b[..., 2:] - 2 * b[..., 1:-1] + b[..., :-2]) / dr**2
    out[..., 0] = (2 * b[..., 0] - 5 * b[..., 1] + 4 * b[..., 2] - b[..., 3]) / dr**2
    out[..., -1] = (2 * b[..., -1] - 5 * b[..., -2] + 4 * b[..., -3] - b[..., -4]) / dr**2
    return out


def _cumtrapz_from(rhs: np.ndarray, dr: float, anchor: str) -> np.ndarray:
    """Integral of rhs from the anchor end (value 0 there)."""
    mid = 0.5 * (rhs[..., 1:] + rhs[..., :-1]) * dr
    out = np.zeros_like(rhs)
    if anchor == "right":
        out[..., :-1] = -np.cumsum(mid[..., ::-1], axis=-1)[..., ::-1]
    else:
        out[..., 1:] = np.cumsum(mid, axis=-1)
    return out


def solve_transport(gamma: np.ndarray, r: np.ndarray, m: float, K: int, family: str = "-",
                    beta_minus: np.ndarray | None = None, match_index: int = 2,
                    decay_tol: float = 1e-8, rays: np.ndarray | None = None) -> TransportCoefficients:
    """Ray-wise transport chain for the conormal coefficients beta_k.

    Along each ray from the vertex, with the angular part of the Laplacian
    dropped, (Delta - (2/r) d_r) beta = beta'' and

        2(m+k+1) beta_{k+1}' = sum_{l+mu=k} gamma_l beta_mu - beta_k'',

    which for k = 0 reads 2(m+1) beta_1' = gamma_0.

    The minus family decays at the outer end of ``r``; the plus family is
    matched to ``beta_minus`` at r[match_index]. ``gamma`` has shape
    (K, ..., nr); missing orders are zero.
    """
    if family not in ("-", "+"):
        raise ValueError("family must be '-' or '+'")
    r = np.asarray(r, dtype=float)
    dr = float(r[1] - r[0])
    if not np.allclose(np.diff(r), dr, rtol=1e-9, atol=1e-12):
        raise PreconditionError("transport needs a uniform radial grid")
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape[-1] != r.size:
        raise PreconditionError("gamma must be sampled on r")
    shape = gamma.shape[1:]
    g = np.zeros((max(K, 1),) + shape)
    g[:min(K, gamma.shape[0])] = gamma[:K]
    if family == "-" and np.any(np.abs(g[..., -1]) > decay_tol):
        raise PreconditionError("gamma does not decay at the outer radius; no decaying transport solution")
    if family == "+" and beta_minus is None:
        raise PreconditionError("plus family needs beta_minus for the vertex matching")
    beta = np.zeros((K + 1,) + shape)
    beta[0] = 1.0
    for k in range(K):
        rhs = sum(g[l] * beta[k - l] for l in range(min(k, g.shape[0] - 1) + 1))
        if k >= 1:
            rhs = rhs - _d2(beta[k], dr)
        rhs = rhs / (2 * (m + k + 1))
        if family == "-":
            beta[k + 1] = _cumtrapz_from(rhs, dr, "right")
        else:
            prim = _cumtrapz_from(rhs, dr, "left")
            j = match_index
            beta[k + 1] = prim - prim[..., j:j + 1] + beta_minus[k + 1][..., j:j + 1]
    tail = float(np.max(np.abs(beta[1:, ..., -1]))) if K > 0 else 0.0
    return TransportCoefficients(r, beta, g[:K], m, family, rays, {"outer_value": tail})
