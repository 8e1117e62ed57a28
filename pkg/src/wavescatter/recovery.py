"""Detection of interaction singularities and reconstruction of the nonlinearity.

The 3D experiments march the binary members w_a (components 0/1) of the
perturbation hierarchy on a cube, around a radial background u0 taken from
the lattice background of :mod:`wavescatter.expansion`. Radiation fields of
selected members are extracted along probe rays; a windowed second-difference
energy then compares the predicted interaction pattern with reference
windows.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.ndimage import map_coordinates

from .conormal_geometry import ConeConfig, PatternSet, plane_patterns
from .errors import ConfigurationError, PreconditionError
from .expansion import MultiIndex, _background
from .grids_norms import Grid3D, RadialGrid, SpacetimeTrajectory
from .nonlinearity import Nonlinearity, from_callables
from .radiation import RadialWindow, RadiationFieldData, extract_radiation_numeric
from .wave_solver import Stepper3D

# ---------------------------------------------------------------------------
# background on the cube


class CubeBackground:
    """Radial background u0(t, |x|) interpolated from stored lattice levels."""

    def __init__(self, nl: Nonlinearity, Y0: RadiationFieldData | None, grid: Grid3D,
                 h: float = 0.02, T: float = 10.0, tol: float = 1e-12):
        self.grid = grid
        self.zero = Y0 is None or not np.any(Y0.values)
        rmax = float(np.sqrt(3) * grid.half_width) + 1.0
        ext = 1.0
        if not self.zero:
            nz = np.nonzero(Y0.values)[0]
            ext = float(np.max(np.abs(Y0.s[nz])))
        win = RadialWindow.build(h, max(ext, rmax - 2 * T), T)
        if win.n_space * h < rmax:
            win = RadialWindow(h, win.n_time, int(np.ceil(rmax / h)) + 2)
        self.window = win
        if self.zero:
            self.levels = None
        else:
            bg = _background(nl, RadiationFieldData(Y0.s, Y0.values), win, tol, 40)
            self.levels = bg.levels
        R = grid.radius()
        j = np.floor(R / h).astype(np.int64)
        self._j = np.minimum(j, win.n_space - 1)
        self._f = R / h - self._j
        self._R = R
        self._origin = R < 1e-12

    def u0(self, t: float) -> np.ndarray:
        if self.zero:
            return np.zeros(self.grid.shape)
        win = self.window
        x = t / win.h + win.n_time + 1
        i = int(np.floor(x))
        if i < 0 or i + 1 >= self.levels.shape[0]:
            raise ConfigurationError(f"t = {t} outside the background window")
        a = x - i
        W = (1 - a) * self.levels[i] + a * self.levels[i + 1]
        w = (1 - self._f) * W[self._j] + self._f * W[self._j + 1]
        out = np.divide(w, self._R, out=np.zeros_like(w), where=~self._origin)
        if self._origin.any():
            out[self._origin] = (4 * W[1] - W[2]) / (2 * win.h)
        return out


# ---------------------------------------------------------------------------
# binary hierarchy sources


def set_partitions(items: Sequence[int]):
    """All partitions of a list into nonempty blocks (as tuples of tuples)."""
    items = list(items)
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield ((first,),) + part
        for i in range(len(part)):
            yield part[:i] + ((first,) + part[i],) + part[i + 1:]


def binary_indices(n: int, max_order: int | None = None) -> list[MultiIndex]:
    max_order = n if max_order is None else max_order
    out = [MultiIndex(c) for c in itertools.product((0, 1), repeat=n) if 0 < sum(c) <= max_order]
    return sorted(out, key=lambda a: (a.order, tuple(-x for x in a)))


def binary_source(alpha: MultiIndex, fields: dict, derivs: Sequence[np.ndarray]) -> np.ndarray:
    """-sum_k f^(k)(u0) sum_{partitions of supp(alpha) into k blocks} prod w_block.

    For 0/1 indices every unordered partition into k distinct blocks stands
    for k! ordered decompositions, which cancels the 1/k! prefactor.
    ``derivs[k]`` holds f^(k)(u0).
    """
    support = [i for i, a in enumerate(alpha) if a]
    n = len(alpha)
    out = None
    for part in set_partitions(support):
        k = len(part)
        if k < 2:
            continue
        prod = -derivs[k]
        for block in part:
            b = MultiIndex(1 if i in block else 0 for i in range(n))
            prod = prod * fields[b]
        out = prod if out is None else out + prod
    return out if out is not None else np.zeros_like(derivs[1])


# ---------------------------------------------------------------------------
# 3D interaction experiment


@dataclass
class InteractionConfig:
    cones: ConeConfig
    n: int = 160
    half_width: float = 6.0
    t_start: float = -2.6
    t_end: float = 4.0
    cfl: float = 0.5
    probe_directions: Sequence[Sequence[float]] = ((1.0, 1.0, 0.0),)
    record: Sequence[MultiIndex] | None = None
    radial_h: float = 0.02
    kappa: float = 1.0
    kappa_index: MultiIndex | None = None
    zero_waves: Sequence[int] = ()


@dataclass
class InteractionResult:
    rays: dict                   # (direction index, member label) -> SpacetimeTrajectory
    directions: np.ndarray
    config: InteractionConfig
    meta: dict = field(default_factory=dict)

    def trajectory(self, member, k: int = 0) -> SpacetimeTrajectory:
        key = member if isinstance(member, str) else MultiIndex(member).label()
        return self.rays[(k, key)]

    def field(self, member, s_grid: np.ndarray, k: int = 0, radius: float | None = None,
              richardson: bool = True) -> RadiationFieldData:
        return extract_radiation_numeric(self.trajectory(member, k), "+", s_grid, radius,
                                         richardson)


def _wave_data(cones: ConeConfig, j: int, t: float, grid: Grid3D) -> np.ndarray:
    X, Y, Z = grid.mesh()
    zj = cones.vertices[j]
    d = np.sqrt((X - zj[0]) ** 2 + (Y - zj[1]) ** 2 + (Z - zj[2]) ** 2)
    x = t - cones.emission_times[j] + d
    G = cones.profile(x)
    return np.divide(G, d, out=np.zeros_like(G), where=d > 0)


def run_interaction(nl: Nonlinearity, Y0: RadiationFieldData | None, cfg: InteractionConfig,
                    progress=None) -> InteractionResult:
    """March the binary hierarchy on the cube and record u_t along probe rays.

    First-order members start as the closed-form incoming waves zeta_j^- at
    t_start (their scattering by the potential before t_start is neglected);
    higher members start from rest. Members listed in ``zero_waves`` are
    switched off.
    """
    cones = cfg.cones
    nw = cones.n_waves
    grid = Grid3D(cfg.half_width, cfg.n)
    h = grid.h
    dt = cfg.cfl * h
    step = Stepper3D(grid, dt, "outflow-3d")
    indices = binary_indices(nw)
    record = [MultiIndex(a) for a in (cfg.record or [tuple([1] * nw)])]
    bg = CubeBackground(nl, Y0, grid, cfg.radial_h)

    # ray sample points in index coordinates
    dirs = np.array([np.asarray(d, float) / np.linalg.norm(d) for d in cfg.probe_directions])
    reach = cfg.half_width - 2 * h
    rmax = reach / np.max(np.abs(dirs), axis=1)
    dr_ray = h / 2
    nray = int(np.floor(np.min(rmax) / dr_ray))
    rr = np.arange(nray + 1) * dr_ray
    coords = [((rr[:, None] * d[None, :]) + cfg.half_width).T / h for d in dirs]

    # members containing a switched-off wave vanish identically and are not marched
    zero = np.zeros(grid.shape)
    active = [a for a in indices if not any(a[j] for j in cfg.zero_waves)]
    prev = {a: zero for a in indices}
    cur = {a: zero for a in indices}
    spare = {}
    for a in active:
        if a.order == 1:
            j = a.index(1)
            prev[a] = _wave_data(cones, j, cfg.t_start, grid)
            cur[a] = _wave_data(cones, j, cfg.t_start + dt, grid)
        else:
            prev[a] = np.zeros(grid.shape)
            cur[a] = np.zeros(grid.shape)
        spare[a] = np.empty(grid.shape)
    nsteps = int(np.ceil((cfg.t_end - cfg.t_start) / dt))
    rec: dict = {(k, a.label()): [] for k in range(len(dirs)) for a in record}
    times = []
    f = nl.derivatives
    for n in range(1, nsteps):
        t = cfg.t_start + n * dt
        u0 = bg.u0(t)
        derivs = [None] + [f[k](u0) for k in range(1, nw + 1)]
        new = dict(cur)
        for a in active:
            src = -derivs[1] * cur[a]
            if a.order >= 2:
                extra = binary_source(a, cur, derivs)
                if cfg.kappa_index is not None and a == cfg.kappa_index:
                    extra = cfg.kappa * extra
                src += extra
            new[a] = step.step(prev[a], cur[a], src, spare[a])
        for a in record:
            ut = (new[a] - prev[a]) / (2 * dt)
            for k, c in enumerate(coords):
                rec[(k, a.label())].append(map_coordinates(ut, c, order=1, mode="nearest"))
        times.append(t)
        for a in active:
            spare[a] = prev[a]
        prev, cur = cur, new
        if progress is not None:
            progress(n, nsteps)
    times = np.array(times)
    rays = {}
    for (k, lab), vals in rec.items():
        g = RadialGrid(float(rr[-1]), nray, include_origin=True, direction=tuple(dirs[k]))
        ut = np.array(vals)
        rays[(k, lab)] = SpacetimeTrajectory(times, np.zeros_like(ut), ut, g,
                                             {"member": lab, "direction": dirs[k].tolist()})
    return InteractionResult(rays, dirs, cfg, {"h": h, "dt": dt, "steps": nsteps,
                                               "active_members": [a.label() for a in active]})


# ---------------------------------------------------------------------------
# detection


@dataclass
class SingularityProbe:
    """Window around a predicted pattern point at fixed omega, with reference windows."""

    omega: np.ndarray
    center: float
    half_width: float = 0.3
    offsets: Sequence[float] = (-1.2, -1.8, -2.4)
    pattern: PatternSet | None = None

    def windows(self) -> list[float]:
        return [self.center + o for o in self.offsets]

    def check(self, planes: Sequence[PatternSet], margin: float = 0.2) -> None:
        """Raise if any window meets a plane pattern at this omega."""
        om = np.asarray(self.omega, dtype=float)
        om = om / np.linalg.norm(om)
        for P in planes:
            # planes are s = t0 - <w, p>: the residual at s is s - s_plane
            s_plane = -float(P.residual(np.array([0.0]), om[None])[0])
            for c in [self.center] + self.windows():
                if abs(c - s_plane) < self.half_width + margin:
                    raise PreconditionError(
                        f"probe window at s = {c:.3f} overlaps the plane pattern s = {s_plane:.3f}")


@dataclass
class DetectionReport:
    on: float
    off: list
    ratio: float
    detected: bool
    threshold: float
    no_signal: bool = False

    def as_row(self) -> dict:
        return {"on": self.on, "off_mean": float(np.mean(self.off)), "ratio": self.ratio,
                "detected": self.detected, "no_signal": self.no_signal}


def highpass_energy(s: np.ndarray, v: np.ndarray, center: float, half_width: float) -> float:
    """Sum of squared second differences of v over |s - center| <= half_width."""
    d2 = np.zeros_like(v)
    d2[1:-1] = v[2:] - 2 * v[1:-1] + v[:-2]
    m = np.abs(s - center) <= half_width
    m[0] = m[-1] = False
    return float(np.sum(d2[m] ** 2))


def detect_new_singularities(Xi: RadiationFieldData, probe: SingularityProbe,
                             planes: Sequence[PatternSet] | None = None,
                             threshold: float = 5.0, floor: float = 1e-300) -> DetectionReport:
    """On-pattern vs reference high-pass energy of a field sampled at ``probe.omega``.

    A field that vanishes in every window has no signal and reports ratio 1.
    """
    if planes is not None:
        probe.check(planes)
    v = np.asarray(Xi.values, dtype=float)
    if v.ndim == 2:
        if v.shape[1] != 1:
            raise PreconditionError("detection expects the field at a single direction")
        v = v[:, 0]
    on = highpass_energy(Xi.s, v, probe.center, probe.half_width)
    off = [highpass_energy(Xi.s, v, c, probe.half_width) for c in probe.windows()]
    ref = float(np.mean(off))
    if on <= floor and ref <= floor:
        return DetectionReport(on, off, 1.0, False, threshold, no_signal=True)
    ratio = on / max(ref, floor)
    return DetectionReport(on, off, ratio, ratio >= threshold, threshold)


@dataclass
class ScalingReport:
    kappas: np.ndarray
    amplitudes: np.ndarray
    slope: float
    meta: dict = field(default_factory=dict)


def amplitude_scaling_probe(nl: Nonlinearity, Y0: RadiationFieldData | None,
                            cfg: InteractionConfig, probe: SingularityProbe,
                            s_grid: np.ndarray, kappas: Sequence[float] = (0.5, 1.0, 2.0),
                            member=None, radius: float | None = None) -> ScalingReport:
    """On-pattern amplitude of the top member with its nonlinear source scaled by kappa.

    The amplitude is the square root of the windowed high-pass energy, so a
    source-linear response gives slope 1 in log-log.
    """
    if len(kappas) < 2:
        raise ValueError("need at least two kappa values")
    nw = cfg.cones.n_waves
    member = MultiIndex(member or tuple([1] * nw))
    amps = []
    for kp in kappas:
        c = InteractionConfig(**{**cfg.__dict__, "kappa": float(kp), "kappa_index": member,
                                 "record": [member]})
        res = run_interaction(nl, Y0, c)
        F = res.field(member, s_grid, radius=radius)
        v = F.values[:, 0] if F.values.ndim == 2 else F.values
        amps.append(np.sqrt(highpass_energy(F.s, v, probe.center, probe.half_width)))
    amps = np.array(amps)
    k = np.asarray(kappas, dtype=float)
    ok = amps > 0
    slope = float(np.polyfit(np.log(k[ok]), np.log(amps[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    return ScalingReport(k, amps, slope, {"member": member.label()})


# ---------------------------------------------------------------------------
# reconstruction of f


@dataclass
class DerivativeSamples:
    points: np.ndarray
    g3: np.ndarray | None = None
    g4: np.ndarray | None = None
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        for g in (self.g3, self.g4):
            if g is not None and not np.all(np.isfinite(g)):
                raise PreconditionError("derivative samples must be finite")


def _integrate_from_zero(u: np.ndarray, y: np.ndarray, i0: int) -> np.ndarray:
    out = np.zeros_like(y)
    out[i0:] = cumulative_trapezoid(y[i0:], u[i0:], initial=0.0)
    if i0 > 0:
        left = cumulative_trapezoid(y[i0::-1], u[i0::-1], initial=0.0)
        out[:i0 + 1] = left[::-1]
    return out


def reconstruct_f_from_third_derivative(u: np.ndarray, g3: np.ndarray) -> Nonlinearity:
    """f with f(0) = f'(0) = f''(0) = 0 and f''' = g3, tabulated on ``u``.

    The vanishing constants at 0 are forced by the growth hypothesis on f.
    """
    u = np.asarray(u, dtype=float)
    g3 = np.asarray(g3, dtype=float)
    if u.ndim != 1 or u.size != g3.size or u.size < 3:
        raise PreconditionError("u and g3 must be 1D arrays of equal length >= 3")
    if np.any(np.diff(u) <= 0):
        raise PreconditionError("u must be strictly increasing")
    if not (u[0] <= 0.0 <= u[-1]):
        raise PreconditionError("the sample interval must contain 0 to fix the constants")
    if not np.any(u == 0.0):
        i = np.searchsorted(u, 0.0)
        g0 = np.interp(0.0, u, g3)
        u = np.insert(u, i, 0.0)
        g3 = np.insert(g3, i, g0)
    i0 = int(np.nonzero(u == 0.0)[0][0])
    f2 = _integrate_from_zero(u, g3, i0)
    f1 = _integrate_from_zero(u, f2, i0)
    f0 = _integrate_from_zero(u, f1, i0)
    g4 = np.gradient(g3, u)
    g5 = np.gradient(g4, u)
    tabs = [f0, f1, f2, g3, g4, g5]

    def interp(tab):
        return lambda x, tab=tab: np.interp(np.asarray(x, dtype=float), u, tab)

    F = _integrate_from_zero(u, f0, i0)
    nl = from_callables("tabulated", [interp(t) for t in tabs], interp(F))
    nl.params.update(u_min=float(u[0]), u_max=float(u[-1]), n_samples=int(u.size))
    return nl


@dataclass
class PhiReport:
    equal: bool
    check3: float
    check4: float
    components: list
    first_violation: dict | None
    offending: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"equal": self.equal, "check3": self.check3, "check4": self.check4,
                "components": self.components, "first_violation": self.first_violation,
                "offending": self.offending}


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs [i, j) of True."""
    d = np.diff(np.concatenate([[0], mask.astype(int), [0]]))
    starts = np.nonzero(d == 1)[0]
    ends = np.nonzero(d == -1)[0]
    return list(zip(starts.tolist(), ends.tolist()))


def verify_phi_equality(s: np.ndarray, phi1: np.ndarray, phi2: np.ndarray,
                        nl1: Nonlinearity, nl2: Nonlinearity, tol: float = 1e-8) -> PhiReport:
    """Check that matching third/fourth-derivative data force phi1 = phi2.

    Checks f1'''(phi1) = f2'''(phi2) and f1''''(phi1) phi1' = f2''''(phi2) phi2'.
    On the open set where both profiles are nonzero and the derivatives agree
    the difference is constant on each component; a component touching the
    zero set must carry constant 0 by continuity.
    """
    s = np.asarray(s, dtype=float)
    p1 = np.asarray(phi1, dtype=float)
    p2 = np.asarray(phi2, dtype=float)
    d1 = np.gradient(p1, s)
    d2 = np.gradient(p2, s)
    c3 = np.abs(nl1.derivatives[3](p1) - nl2.derivatives[3](p2))
    c4 = np.abs(nl1.derivatives[4](p1) * d1 - nl2.derivatives[4](p2) * d2)
    scale3 = max(1.0, float(np.max(np.abs(nl1.derivatives[3](p1)))))
    scale4 = max(1.0, float(np.max(np.abs(nl1.derivatives[4](p1) * d1))))
    first = None
    bad3 = np.nonzero(c3 > tol * scale3)[0]
    bad4 = np.nonzero(c4 > tol * scale4)[0]
    if bad3.size:
        i = int(bad3[0])
        first = {"check": "third", "s": float(s[i]), "difference": float(c3[i])}
    elif bad4.size:
        i = int(bad4[0])
        first = {"check": "fourth", "s": float(s[i]), "difference": float(c4[i])}
    ztol = tol * max(1.0, float(np.max(np.abs(p1))))
    open_set = (np.abs(p1) > ztol) & (np.abs(p2) > ztol)
    dtol = 1e3 * tol * max(1.0, float(np.max(np.abs(d1))))
    smooth = np.abs(d1 - d2) <= dtol
    comps = []
    for i, j in _runs(open_set & smooth):
        c = float(np.median(p1[i:j] - p2[i:j]))
        touches_zero = (i > 0 and not open_set[i - 1]) or (j < s.size and not open_set[j % s.size]) \
            or i == 0 or j == s.size
        comps.append({"s_start": float(s[i]), "s_end": float(s[j - 1]), "constant": c,
                      "touches_zero_set": bool(touches_zero), "ok": abs(c) <= ztol})
    bad_comp = [c for c in comps if not c["ok"]]
    if bad_comp and (first is None or bad_comp[0]["s_start"] < first["s"]):
        c = bad_comp[0]
        first = {"check": "constant", "s": c["s_start"], "difference": c["constant"],
                 "component": (c["s_start"], c["s_end"])}
    equal = first is None
    return PhiReport(equal, float(c3.max(initial=0.0)), float(c4.max(initial=0.0)), comps, first,
                     bad_comp)
