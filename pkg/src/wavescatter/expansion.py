"""Multi-parameter perturbation hierarchy of the scattering operator.

For inputs Y0 + sum_j eps_j Y_j the solution is expanded as
u = u0 + sum_{0 < |a| <= 4} eps^a w_a. Every member solves the linearized
equation around u0,

    box w_a + f'(u0) w_a = -sum_{k>=2} f^(k)(u0)/k! * sum_{b1+...+bk = a} w_b1 ... w_bk,

with ordered decompositions into nonzero multi-indices. First-order members
have backward field Y_j, all others start from rest in the far past. Their
forward fields Xi_a are the Taylor coefficients of the scattering map.

All members are marched together on the unit-CFL lattice of
:class:`~wavescatter.radiation.RadialWindow`, so the coefficients are exact
Taylor coefficients of the discrete scattering map.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .errors import DependencyError, PreconditionError
from .grids_norms import SpacetimeTrajectory, pade_mass_solve
from .nonlinearity import Nonlinearity
from .radiation import (CharacteristicMarch, RadialWindow, RadiationFieldData,
                        _l2, _readouts_from_levels, extend_outgoing, free_level,
                        free_potential, inverse_radiation, levels_from_data,
                        project_parity, scattering_forward)

MAX_ORDER = 4


class MultiIndex(tuple):
    """Nonnegative integer multi-index with componentwise arithmetic."""

    def __new__(cls, *components):
        if len(components) == 1 and not isinstance(components[0], (int, np.integer)):
            components = tuple(components[0])
        comps = tuple(int(c) for c in components)
        if any(c < 0 for c in comps):
            raise ValueError(f"multi-index components must be nonnegative: {comps}")
        return super().__new__(cls, comps)

    @property
    def order(self) -> int:
        return sum(self)

    def __add__(self, other):
        return MultiIndex(a + b for a, b in zip(self, other, strict=True))

    def __sub__(self, other):
        return MultiIndex(a - b for a, b in zip(self, other, strict=True))

    def __le__(self, other):
        return all(a <= b for a, b in zip(self, other, strict=True))

    def is_zero(self) -> bool:
        return not any(self)

    def __repr__(self) -> str:
        return "MultiIndex" + tuple.__repr__(tuple(self))

    def label(self) -> str:
        return "".join(str(c) for c in self)

    @classmethod
    def unit(cls, j: int, n: int = 4) -> "MultiIndex":
        return cls(1 if i == j else 0 for i in range(n))


def all_indices(n: int = 4, max_order: int = MAX_ORDER, binary: bool = False) -> list[MultiIndex]:
    """Nonzero multi-indices of length n with |a| <= max_order, sorted by order."""
    top = 1 if binary else max_order
    out = [MultiIndex(c) for c in itertools.product(range(top + 1), repeat=n)
           if 0 < sum(c) <= max_order]
    return sorted(out, key=lambda a: (a.order, tuple(-c for c in a)))


def is_downward_closed(indices: Iterable[MultiIndex]) -> bool:
    s = set(indices)
    for a in s:
        for b in _nonzero_below(a):
            if b != a and b not in s:
                return False
    return True


def _nonzero_below(a: MultiIndex) -> list[MultiIndex]:
    return [MultiIndex(c) for c in itertools.product(*(range(x + 1) for x in a)) if any(c)]


# ---------------------------------------------------------------------------
# source assembly


def ordered_decompositions(alpha: MultiIndex, k: int) -> list[tuple[MultiIndex, ...]]:
    """All ordered k-tuples of nonzero multi-indices summing to alpha (brute force)."""
    if k == 1:
        return [(alpha,)] if not alpha.is_zero() else []
    out = []
    for b in _nonzero_below(alpha):
        rest = alpha - b
        if rest.order < k - 1:
            continue
        for tail in ordered_decompositions(rest, k - 1):
            out.append((b,) + tail)
    return out


def brute_force_source(alpha: MultiIndex, members: Mapping[MultiIndex, np.ndarray],
                       nl: Nonlinearity, u0: np.ndarray) -> np.ndarray:
    """Reference right-hand side by explicit enumeration of decompositions.

    Excludes the -f'(u0) w_alpha term. ``members`` maps indices to u-values.
    """
    u0 = np.asarray(u0, dtype=float)
    out = np.zeros_like(u0)
    for k in range(2, alpha.order + 1):
        tot = np.zeros_like(u0)
        for tup in ordered_decompositions(alpha, k):
            prod = np.ones_like(u0)
            for b in tup:
                if b not in members:
                    raise DependencyError(f"member {b!r} needed for {alpha!r}")
                prod = prod * members[b]
            tot += prod
        out -= nl.derivatives[k](u0) / math.factorial(k) * tot
    return out


class TruncatedAlgebra:
    """Products of truncated multivariate power series with array coefficients.

    A series is stored as an array whose first axis runs over ``indices``
    (nonzero multi-indices, downward closed); the constant term is zero.
    """

    def __init__(self, indices: Sequence[MultiIndex]):
        self.indices = list(indices)
        self.pos = {a: i for i, a in enumerate(self.indices)}
        A, B, C = [], [], []
        for ia, a in enumerate(self.indices):
            for ib, b in enumerate(self.indices):
                c = a + b
                if c in self.pos:
                    A.append(ia)
                    B.append(ib)
                    C.append(self.pos[c])
        self.A = np.array(A, dtype=int)
        self.B = np.array(B, dtype=int)
        n = len(self.indices)
        self.G = sparse.csr_matrix((np.ones(len(C)), (np.array(C, dtype=int), np.arange(len(C)))),
                                   shape=(n, len(C)))
        self.max_order = max((a.order for a in self.indices), default=0)

    def mul(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        if self.A.size == 0:
            return np.zeros_like(P)
        shape = P.shape
        prod = (P.reshape(shape[0], -1)[self.A] * Q.reshape(shape[0], -1)[self.B])
        return np.asarray(self.G @ prod).reshape(shape)

    def sources(self, U: np.ndarray, u0: np.ndarray, nl: Nonlinearity) -> np.ndarray:
        """-sum_{k>=2} f^(k)(u0)/k! (U^k)_a for every index a."""
        out = np.zeros_like(U)
        if self.max_order < 2:
            return out
        Pk = U
        for k in range(2, self.max_order + 1):
            Pk = self.mul(Pk, U)
            ck = nl.derivatives[k](u0) / math.factorial(k)
            out -= ck * Pk
        return out


def assemble_source(alpha: MultiIndex, members: Mapping[MultiIndex, np.ndarray],
                    nl: Nonlinearity, u0: np.ndarray) -> np.ndarray:
    """Right-hand side for w_alpha excluding -f'(u0) w_alpha.

    ``members`` maps multi-indices to u-values on a common grid; every
    nonzero index strictly below alpha must be present.
    """
    alpha = MultiIndex(alpha)
    below = [b for b in _nonzero_below(alpha) if b != alpha]
    missing = [b for b in below if b not in members]
    if missing:
        raise DependencyError(f"w_{alpha.label()} needs {[b.label() for b in missing]}")
    idx = sorted(below + [alpha], key=lambda a: a.order)
    alg = TruncatedAlgebra(idx)
    u0 = np.asarray(u0, dtype=float)
    U = np.stack([np.zeros_like(u0) if b == alpha else np.asarray(members[b], dtype=float)
                  for b in idx])
    return alg.sources(U, u0, nl)[alg.pos[alpha]]


# ---------------------------------------------------------------------------
# background and hierarchy


@dataclass
class Background:
    """Stored lattice levels of u0 on n = -M-1..M+1 and its scattering data."""

    window: RadialWindow
    levels: np.ndarray
    data: object
    forward: RadiationFieldData
    backward_target: np.ndarray

    def level(self, n: int) -> np.ndarray:
        return self.levels[n + self.window.n_time + 1]


def _stack_to_u(W: np.ndarray, r: np.ndarray) -> np.ndarray:
    U = np.zeros_like(W)
    U[..., 1:] = W[..., 1:] / r[1:]
    return U


def _background(nl: Nonlinearity, Y0: RadiationFieldData | None, win: RadialWindow,
                tol: float, max_iter: int) -> Background:
    M, N = win.n_time, win.n_space
    levels = np.zeros((2 * M + 3, N + 1))
    if Y0 is None or not np.any(Y0.values):
        z = np.zeros(win.s.size)
        return Background(win, levels, None, win.field(z, "+"), z)
    d = inverse_radiation(nl, Y0, win, tol=tol, max_iter=max_iter)
    Wm, W0, Wp = levels_from_data(nl, win, d)
    store: dict = {}
    out = _readouts_from_levels(nl, win, W0, Wm, Wp, "+-", store)
    for n, W in store.items():
        levels[n + M + 1] = W
    F0 = project_parity(win.samples(Y0))[0]
    return Background(win, levels, d, win.field(out["+"], "+"), F0)


def solve_background(nl: Nonlinearity, Y0: RadiationFieldData, window: RadialWindow | None = None,
                     T: float = 10.0, stride: int | None = None, tol: float = 1e-12,
                     max_iter: int = 25) -> SpacetimeTrajectory:
    """u0 with backward radiation field Y0, as snapshots on the window grid."""
    win = window or RadialWindow.for_field(Y0, T)
    bg = _background(nl, Y0, win, tol, max_iter)
    M = win.n_time
    stride = stride or max(1, (2 * M + 2) // 40)
    levels = {n: bg.level(n) for n in range(-M - 1, M + 2)}
    traj = _snapshots(levels, win, stride, -M - 1, M)
    traj.meta.update(forward=bg.forward, data=bg.data)
    return traj


@dataclass
class Member:
    index: MultiIndex
    w: SpacetimeTrajectory | None
    xi: RadiationFieldData
    backward: RadiationFieldData


@dataclass
class Hierarchy:
    u0: SpacetimeTrajectory | None
    members: dict
    window: RadialWindow
    forward0: RadiationFieldData
    meta: dict = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return len(next(iter(self.members))) if self.members else 0

    def xi(self, alpha) -> RadiationFieldData:
        return self.members[MultiIndex(alpha)].xi

    def expansion(self, eps: Sequence[float], order: int = MAX_ORDER) -> np.ndarray:
        """A(Y0) + sum_{|a| <= order} eps^a Xi_a on the window s-grid."""
        eps = np.asarray(eps, dtype=float)
        out = self.forward0.values.copy()
        for a, m in self.members.items():
            if a.order <= order:
                out = out + float(np.prod(eps ** np.array(a))) * m.xi.values
        return out


def solve_hierarchy(nl: Nonlinearity, upsilons: Sequence[RadiationFieldData | None],
                    indices: Sequence[MultiIndex] | None = None,
                    window: RadialWindow | None = None, T: float = 10.0,
                    stride: int | None = None, keep_trajectories: bool = True,
                    tol: float = 1e-13, max_iter: int = 40) -> Hierarchy:
    """Background u0 for upsilons[0] and members w_a for perturbations upsilons[1:].

    ``indices`` defaults to every nonzero multi-index with |a| <= 4; it must
    be downward closed. Members are marched together from level -M-1.
    """
    Y0, Ys = upsilons[0], list(upsilons[1:])
    n = len(Ys)
    if n == 0:
        raise PreconditionError("need at least one perturbation field")
    indices = all_indices(n) if indices is None else [MultiIndex(a) for a in indices]
    if any(len(a) != n for a in indices):
        raise PreconditionError("multi-index length must match the number of perturbations")
    if not is_downward_closed(indices):
        raise PreconditionError("index set must be downward closed")
    indices = sorted(set(indices), key=lambda a: a.order)
    if window is None:
        present = [Y for Y in upsilons if Y is not None]
        ext = max(float(np.max(np.abs(Y.s[np.nonzero(Y.values)[0]]), initial=1.0)) for Y in present)
        window = RadialWindow.build(present[0].ds, ext, T)
    win = window
    M, N, K, h = win.n_time, win.n_space, win.K, win.h
    r = np.arange(N + 1) * h
    bg = _background(nl, Y0, win, tol, max_iter)
    alg = TruncatedAlgebra(indices)
    n_idx = len(indices)

    # first-order members enter as free incoming waves
    n0 = -M - 1
    prev = np.zeros((n_idx, N + 1))
    cur = np.zeros((n_idx, N + 1))
    targets = np.zeros((n_idx, 2 * K + 1))
    for j in range(n):
        e = MultiIndex.unit(j, n)
        if e not in alg.pos or Ys[j] is None:
            continue
        F, _ = project_parity(win.samples(Ys[j]))
        P = free_potential(F, win)
        prev[alg.pos[e]] = free_level(P, win, n0)
        cur[alg.pos[e]] = free_level(P, win, n0 + 1)
        targets[alg.pos[e]] = F

    march = CharacteristicMarch(win)
    acc_p = np.stack([march.initial_readout(prev[i], cur[i], n0) for i in range(n_idx)])
    acc_m = np.zeros_like(acc_p)
    stride = stride or max(1, (2 * M + 2) // 40)
    needed = {k for n in range(n0 + 1, M + 1, stride) for k in (n - 1, n, n + 1)}
    store: dict = {k: v.copy() for k, v in ((n0, prev), (n0 + 1, cur)) if k in needed}
    h2 = h * h
    trace = np.zeros((n_idx, 2 * M + 3))
    trace[:, 0] = prev[:, -1]
    trace[:, 1] = cur[:, -1]
    for m in range(n0 + 1, M + 1):
        u0m = _stack_to_u(bg.level(m), r)
        U = _stack_to_u(cur, r)
        S = -nl.derivatives[1](u0m) * cur + r * alg.sources(U, u0m, nl)
        S[:, 0] = 0.0
        S[:, -1] = 0.0
        Se = h2 * np.concatenate([-S[:, :0:-1], S], axis=1)[:, ::-1]
        acc_p[:, K + m - N:K + m + N + 1] += Se
        acc_m[:, K - m - N:K - m + N + 1] += Se
        nxt = np.empty_like(cur)
        nxt[:, 1:-1] = cur[:, 2:] + cur[:, :-2] - prev[:, 1:-1] + h2 * S[:, 1:-1]
        nxt[:, 0] = 0.0
        nxt[:, -1] = cur[:, -2]
        prev, cur = cur, nxt
        trace[:, m + 1 - n0] = cur[:, -1]
        if keep_trajectories and m + 1 in needed:
            store[m + 1] = cur.copy()
    # backward readout from the final levels via time reversal; the waves that
    # left through the outer node are restored from its trace
    last = extend_outgoing(cur, trace, M + 1, n0)
    before = extend_outgoing(prev, trace, M, n0)
    before = np.pad(before, ((0, 0), (0, last.shape[1] - before.shape[1])))
    acc_m += np.stack([march.initial_readout(last[i], before[i], -M - 1) for i in range(n_idx)])
    xi = acc_p / (2 * h)
    back = -(acc_m / (2 * h))[:, ::-1]

    members = {}
    back_err = 0.0
    for i, a in enumerate(indices):
        w = None
        if keep_trajectories:
            lv = {k: v[i] for k, v in store.items()}
            w = _snapshots(lv, win, stride, n0, M)
        members[a] = Member(a, w, win.field(xi[i], "+", index=a.label()),
                            win.field(back[i], "-", index=a.label()))
        back_err = max(back_err, _l2(win, back[i] - targets[i]))
    u0_traj = None
    if keep_trajectories:
        u0_traj = _snapshots({k: bg.level(k) for k in range(n0, M + 2)}, win, stride, n0, M)
    return Hierarchy(u0_traj, members, win, bg.forward,
                     {"backward_error": back_err, "n_indices": n_idx, "T": win.T, "h": h})


def _snapshots(levels: dict, win: RadialWindow, stride: int, n0: int, M: int) -> SpacetimeTrajectory:
    ns = [n for n in range(n0 + 1, M + 1, stride)]
    lv = {}
    for n in ns:
        for k in (n - 1, n, n + 1):
            lv[k] = levels[k]
    r = np.arange(win.n_space + 1) * win.h
    u = np.array([_stack_to_u(lv[n], r) for n in ns])
    vel = pade_mass_solve(np.array([(lv[n + 1] - lv[n - 1]) / (2 * win.h) for n in ns]), "odd")
    ut = _stack_to_u(vel, r)
    W = np.array([lv[n] for n in ns])
    u[:, 0] = (4 * W[:, 1] - W[:, 2]) / (2 * win.h)
    ut[:, 0] = (4 * vel[:, 1] - vel[:, 2]) / (2 * win.h)
    return SpacetimeTrajectory(np.array(ns) * win.h, u, ut, win.grid, {"stride": stride})


# ---------------------------------------------------------------------------
# remainder study


@dataclass
class RemainderReport:
    eps: np.ndarray
    delta: np.ndarray
    slope: float
    order: int
    meta: dict = field(default_factory=dict)

    def as_rows(self) -> list[tuple[float, float]]:
        return list(zip(self.eps.tolist(), self.delta.tolist()))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError("slope fit needs at least 3 points")
    if np.any(y <= 0) or np.any(x <= 0):
        raise ValueError("slope fit needs positive values")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def remainder_study(nl: Nonlinearity, upsilons: Sequence[RadiationFieldData | None],
                    eps_list: Sequence[float], order: int | Sequence[int] = MAX_ORDER,
                    hierarchy: Hierarchy | None = None, window: RadialWindow | None = None,
                    T: float = 10.0, tol: float = 1e-14, max_iter: int = 60):
    """Delta(eps) = ||A(Y0 + eps sum Y_j) - A(Y0) - sum_{|a|<=order} eps^|a| Xi_a||.

    ``order`` may be a list, giving one report per truncation order from the
    same set of scattering solves.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ValueError("remainder_study needs at least 3 eps values")
    orders = [order] if np.isscalar(order) else list(order)
    hier = hierarchy or solve_hierarchy(nl, upsilons, window=window, T=T,
                                        keep_trajectories=False)
    win = hier.window
    Y0, Ys = upsilons[0], upsilons[1:]
    base = np.zeros(win.s.size) if Y0 is None else win.samples(Y0)
    pert = sum(win.samples(Y) for Y in Ys if Y is not None)
    outs = []
    for e in eps_list:
        F = win.field(base + e * pert, "-")
        outs.append(scattering_forward(nl, F, win, tol=tol, max_iter=max_iter).values)
    n = hier.n_params
    reports = []
    for o in orders:
        delta = np.array([_l2(win, A - hier.expansion([e] * n, o)) for e, A in zip(eps_list, outs)])
        reports.append(RemainderReport(np.array(eps_list), delta, loglog_slope(eps_list, delta), o,
                                       {"backward_error": hier.meta["backward_error"]}))
    return reports[0] if np.isscalar(order) else reports


def polarization_check(nl: Nonlinearity, upsilons: Sequence[RadiationFieldData | None],
                       eps: float = 0.01, window: RadialWindow | None = None, T: float = 10.0,
                       tol: float = 1e-14, max_iter: int = 60) -> dict:
    """Mixed second difference of the scattering map against Xi_(1,1).

    With upsilons = (Y0, Y1, Y2),
        D = [A(+,+) - A(+,-) - A(-,+) + A(-,-)] / (4 eps^2),  A(a,b) = A(Y0 + a eps Y1 + b eps Y2),
    equals Xi_(1,1) up to O(eps^2). A wrong decomposition count would show
    as an O(1) relative error.
    """
    if len(upsilons) != 3:
        raise ValueError("polarization_check takes (Y0, Y1, Y2)")
    idx = [MultiIndex(1, 0), MultiIndex(0, 1), MultiIndex(1, 1)]
    hier = solve_hierarchy(nl, upsilons, indices=idx, window=window, T=T,
                           keep_trajectories=False)
    win = hier.window
    Y0, Y1, Y2 = upsilons
    base = np.zeros(win.s.size) if Y0 is None else win.samples(Y0)
    p1, p2 = win.samples(Y1), win.samples(Y2)
    D = np.zeros(win.s.size)
    for a, b in itertools.product((1, -1), repeat=2):
        F = win.field(base + eps * (a * p1 + b * p2), "-")
        D += a * b * scattering_forward(nl, F, win, tol=tol, max_iter=max_iter).values
    D /= 4 * eps**2
    xi = hier.xi((1, 1)).values
    ref = _l2(win, xi)
    err = _l2(win, D - xi)
    return {"eps": eps, "xi_norm": ref, "difference": err,
            "relative": err / ref if ref > 0 else float("inf")}
