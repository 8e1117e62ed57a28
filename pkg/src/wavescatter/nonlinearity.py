"""Candidate nonlinearities f(u) and sampled checks of the structural hypotheses.

A :class:`Nonlinearity` carries vectorized callables for f and its first five
derivatives together with the antiderivative F(u) = int_0^u f.  Two families
are built in:

* ``power(c, p)``: f = c u^p (p = 5 is the energy-critical case),
* ``perturbed(c, z0)``: f^(4)(u) = 120 c u (1 + z0 u^2 / (1 + u^2)) with
  f^(j)(0) = 0 for j <= 3, which reduces to c u^5 at z0 = 0.

Hypothesis checks are sampled on a grid and reported, never asserted.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

ArrayFn = Callable[[np.ndarray], np.ndarray]

__all__ = [
    "Nonlinearity",
    "HypothesisCheck",
    "ValidationReport",
    "power",
    "perturbed",
    "zero",
    "from_callables",
    "from_spec",
    "evaluate",
    "antiderivative",
    "validate_hypotheses",
]


@dataclass(frozen=True)
class Nonlinearity:
    """Odd nonlinearity f with derivatives up to order five.

    Parameters
    ----------
    label : str
        Human readable name, echoed into manifests.
    derivatives : tuple of callables
        ``derivatives[j]`` evaluates f^(j) on arrays, j = 0..5.
    antiderivative_F : callable or None
        Closed form of F; ``None`` selects adaptive quadrature.
    growth_constant : float
        Nominal C with (1/C)|u|^5 <= |f(u)| <= C|u|^5.
    params : dict
        Constructor parameters for serialization.
    """

    label: str
    derivatives: tuple
    antiderivative_F: ArrayFn | None = None
    growth_constant: float = 1.0
    params: dict = field(default_factory=dict)

    def eval(self, u, order: int = 0):
        return evaluate(self, u, order)

    def F(self, u):
        return antiderivative(self, u)

    def scaled(self, kappa: float) -> "Nonlinearity":
        """Return kappa * f (used to switch the nonlinearity off with kappa = 0)."""
        derivs = tuple(_scale(d, kappa) for d in self.derivatives)
        F = None if self.antiderivative_F is None else _scale(self.antiderivative_F, kappa)
        params = dict(self.params)
        params["scale"] = params.get("scale", 1.0) * kappa
        return Nonlinearity(f"{kappa:g}*{self.label}", derivs, F,
                            self.growth_constant, params)

    @property
    def is_zero(self) -> bool:
        return bool(self.params.get("scale", 1.0) == 0.0 or self.params.get("name") == "zero")


def _scale(fn: ArrayFn, kappa: float) -> ArrayFn:
    return lambda u: kappa * fn(u)


def evaluate(nl: Nonlinearity, u, order: int = 0):
    """Return f^(order)(u) for order in 0..5 (scalar in, scalar out)."""
    if not isinstance(order, (int, np.integer)) or not 0 <= order <= 5:
        raise ValueError(f"derivative order must be an integer in 0..5, got {order!r}")
    arr = np.asarray(u, dtype=float)
    out = nl.derivatives[order](arr)
    return float(out) if np.ndim(out) == 0 else out


def antiderivative(nl: Nonlinearity, u):
    """F(u) = int_0^u f(s) ds, closed form when known else adaptive quadrature."""
    arr = np.asarray(u, dtype=float)
    if nl.antiderivative_F is not None:
        out = nl.antiderivative_F(arr)
    else:
        f = nl.derivatives[0]
        flat = np.array([
            integrate.quad(lambda s: float(f(np.asarray(s))), 0.0, float(x),
                           epsabs=0.0, epsrel=1e-10, limit=200)[0]
            for x in arr.ravel()
        ])
        out = flat.reshape(arr.shape)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# built-in families


def _ipow(u: np.ndarray, k: int) -> np.ndarray:
    # repeated squaring; numpy's pow is slow for integer exponents above 2
    if k == 0:
        return np.ones_like(u)
    out = None
    base = u
    while k:
        if k & 1:
            out = base if out is None else out * base
        k >>= 1
        if k:
            base = base * base
    return out


def power(c: float = 1.0, p: int = 5) -> Nonlinearity:
    """f(u) = c u^p for an integer p >= 1."""
    if c <= 0:
        raise ValueError("power family needs c > 0")
    p = int(p)

    def deriv(j: int) -> ArrayFn:
        if j > p:
            return lambda u: np.zeros_like(np.asarray(u, dtype=float))
        coef = c * factorial(p) / factorial(p - j)
        return lambda u, k=p - j: coef * _ipow(np.asarray(u, dtype=float), k)

    derivs = tuple(deriv(j) for j in range(6))
    F = lambda u: c * np.asarray(u, dtype=float) ** (p + 1) / (p + 1)  # noqa: E731
    return Nonlinearity(f"{c:g}*u^{p}", derivs, F, max(c, 1.0 / c),
                        {"name": "power", "c": c, "p": p})


def zero() -> Nonlinearity:
    """f = 0, the linear equation."""
    z = lambda u: np.zeros_like(np.asarray(u, dtype=float))  # noqa: E731
    return Nonlinearity("0", tuple(z for _ in range(6)), z, 1.0, {"name": "zero"})


# Closed forms for the z0-part of the perturbed family.  With
#   g(u) = -u / (1 + u^2),
# B_j is the (4 - j)-fold iterated integral of g from 0 (B_4 = g, B_{-1}
# is one more integral, used for F).  For small |u| the closed forms cancel
# catastrophically, so a power series is used there.

_SERIES_CUT = 0.5
_SERIES_TERMS = 40


def _b_series(u: np.ndarray, j: int) -> np.ndarray:
    # g = -sum_k (-1)^k u^(2k+1); integrating n = 4 - j times multiplies the
    # k-th term by (2k+1)! / (2k+1+n)!.
    n = 4 - j
    out = np.zeros_like(u)
    u2 = u * u
    term_pow = u ** (1 + n)
    for k in range(_SERIES_TERMS):
        coef = (-1) ** (k + 1) * factorial(2 * k + 1) / factorial(2 * k + 1 + n)
        out += coef * term_pow
        term_pow = term_pow * u2
    return out


def _b_closed(u: np.ndarray, j: int) -> np.ndarray:
    L = np.log1p(u * u)
    A = np.arctan(u)
    if j == 4:
        return -u / (1 + u * u)
    if j == 3:
        return -0.5 * L
    if j == 2:
        return -0.5 * u * L + u - A
    if j == 1:
        return -0.25 * u * u * L + 0.75 * u * u - u * A + 0.25 * L
    if j == 0:
        return (11 * u**3 / 36 - 0.5 * u * u * A - u / 6
                + (u / 4 - u**3 / 12) * L + A / 6)
    if j == -1:
        return (25 * u**4 / 288 - u**3 * A / 6 - u * u * (u * u - 6) * L / 48
                - 7 * u * u / 48 + u * A / 6 - L / 48)
    raise ValueError(j)


def _b(u, j: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < _SERIES_CUT
    out = np.empty_like(u)
    if np.any(small):
        out[small] = _b_series(u[small], j)
    if np.any(~small):
        out[~small] = _b_closed(u[~small], j)
    return out


def perturbed(c: float = 1.0, z0: float = 0.5) -> Nonlinearity:
    """Family with f^(4)(u) = 120 c u (1 + z0 u^2/(1+u^2)), |z0| < 1.

    Writing C = 120 c, f^(4) = C[(1 + z0) u - z0 u / (1 + u^2)], which
    integrates in closed form; f^(j)(0) = 0 for j <= 3.
    """
    if c <= 0:
        raise ValueError("perturbed family needs c > 0")
    if not abs(z0) < 1:
        raise ValueError("perturbed family needs |z0| < 1")
    C = 120.0 * c
    a = 1.0 + z0

    def as_arr(u):
        return np.asarray(u, dtype=float)

    derivs = (
        lambda u: C * (a * as_arr(u) ** 5 / 120 + z0 * _b(u, 0)),
        lambda u: C * (a * as_arr(u) ** 4 / 24 + z0 * _b(u, 1)),
        lambda u: C * (a * as_arr(u) ** 3 / 6 + z0 * _b(u, 2)),
        lambda u: C * (a * as_arr(u) ** 2 / 2 + z0 * _b(u, 3)),
        lambda u: C * (a * as_arr(u) + z0 * _b(u, 4)),
        lambda u: C * (a + z0 * (as_arr(u) ** 2 - 1) / (1 + as_arr(u) ** 2) ** 2),
    )
    F = lambda u: C * (a * as_arr(u) ** 6 / 720 + z0 * _b(u, -1))  # noqa: E731
    return Nonlinearity(f"perturbed(c={c:g},z0={z0:g})", derivs, F,
                        c * max(1 + abs(z0), 1 / (1 - abs(z0))),
                        {"name": "perturbed", "c": c, "z0": z0})


def from_callables(label: str, derivatives: Sequence[ArrayFn],
                   antiderivative_F: ArrayFn | None = None,
                   growth_constant: float = 10.0) -> Nonlinearity:
    """Wrap user-supplied vectorized callables f, f', ..., f^(5)."""
    if len(derivatives) != 6:
        raise ValueError("need f and five derivatives")
    return Nonlinearity(label, tuple(derivatives), antiderivative_F,
                        growth_constant, {"name": "custom"})


def from_spec(spec: dict) -> Nonlinearity:
    """Build a built-in family from ``{"name": ..., **params}``."""
    name = spec.get("name")
    params = {k: v for k, v in spec.items() if k != "name"}
    if name == "power":
        return power(**params)
    if name == "perturbed":
        return perturbed(**params)
    if name == "zero":
        return zero()
    raise ValueError(f"unknown nonlinearity {name!r}")


# ---------------------------------------------------------------------------
# hypothesis validation


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    detail: str
    worst: float = 0.0
    witnesses: list = field(default_factory=list)


@dataclass
class ValidationReport:
    label: str
    checks: dict
    empirical_C: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "empirical_C": self.empirical_C,
            "all_passed": self.all_passed,
            "checks": {k: {"passed": c.passed, "detail": c.detail, "worst": c.worst,
                           "witnesses": [float(w) for w in c.witnesses[:10]]}
                       for k, c in self.checks.items()},
        }


def _edge_exponent(u: np.ndarray, y: np.ndarray, frac: float = 0.02,
                   where: str = "inner") -> float:
    """Least-squares slope of log|y| against log|u| on the innermost/outermost samples."""
    a = np.abs(u)
    keep = (a > 0) & (np.abs(y) > 0)
    a, y = a[keep], np.abs(y[keep])
    if a.size < 2:
        return np.nan
    order = np.argsort(a)
    n = max(2, int(frac * a.size))
    idx = order[:n] if where == "inner" else order[-n:]
    la, ly = np.log(a[idx]), np.log(y[idx])
    if np.ptp(la) == 0:
        return np.nan
    return float(np.polyfit(la, ly, 1)[0])


def validate_hypotheses(nl: Nonlinearity, sample_grid: Sequence[float],
                        exponent_tol: float = 0.5,
                        h2_bound: float = 50.0) -> ValidationReport:
    """Check H1-H4 and B1 on a symmetric sample grid containing 0.

    Power laws are judged by the log-log exponent of |f^(j)| on the innermost
    and outermost two percent of the grid; the empirically tightest growth
    constant C is reported alongside.
    """
    u = np.sort(np.asarray(sample_grid, dtype=float))
    if u.size == 0:
        raise ValueError("sample grid is empty")
    if not np.allclose(u, -u[::-1], atol=1e-12 * max(1.0, np.abs(u).max())):
        raise ValueError("sample grid must be symmetric about 0")
    if not np.any(u == 0.0):
        raise ValueError("sample grid must contain 0")

    d = [np.asarray(nl.derivatives[j](u), dtype=float) for j in range(5)]
    f = d[0]
    nz = u != 0
    scale = max(np.abs(f).max(), 1e-300)
    checks: dict[str, HypothesisCheck] = {}

    # H1: odd, and |f| comparable to |u|^5
    odd_err = np.abs(f + f[::-1]) / scale
    odd_bad = u[odd_err > 1e-12]
    ratio = np.abs(f[nz]) / np.abs(u[nz]) ** 5
    with np.errstate(divide="ignore"):
        emp_C = float(max(ratio.max(), 1.0 / ratio.min())) if ratio.min() > 0 else np.inf
    p0 = _edge_exponent(u, f, where="inner")
    pinf = _edge_exponent(u, f, where="outer")
    bounded = (abs(p0 - 5) <= exponent_tol and abs(pinf - 5) <= exponent_tol
               and np.isfinite(emp_C))
    h1_ok = odd_bad.size == 0 and bounded
    detail = (f"odd residual max {odd_err.max():.2e}; edge exponents {p0:.3f} (u->0), "
              f"{pinf:.3f} (|u| large); tightest C {emp_C:.4g}")
    wit = list(odd_bad) if odd_bad.size else ([] if bounded else [float(u[nz][np.argmax(ratio)])])
    checks["H1"] = HypothesisCheck("H1", bool(h1_ok), detail, emp_C, wit)

    # H2: u f'(u) ~ f(u) on the extreme samples
    ext = np.abs(u) >= np.quantile(np.abs(u), 0.98)
    ext &= nz & (np.abs(f) > 0)
    r2 = u[ext] * d[1][ext] / f[ext]
    h2_ok = bool(r2.size and np.all(np.isfinite(r2)) and r2.min() > 1 / h2_bound
                 and r2.max() < h2_bound)
    checks["H2"] = HypothesisCheck(
        "H2", h2_ok, f"u f'/f on extreme samples in [{r2.min() if r2.size else np.nan:.4g}, "
                     f"{r2.max() if r2.size else np.nan:.4g}]",
        float(np.max(np.abs(np.log(np.abs(r2))))) if r2.size else np.inf,
        [] if h2_ok else list(u[ext][:5]))

    # H3: F(0) = 0, F convex and nonnegative
    F = np.asarray(antiderivative(nl, u), dtype=float)
    F0 = float(F[u == 0][0])
    Fscale = max(np.abs(F).max(), 1e-300)
    du = np.diff(u)
    slopes = np.diff(F) / du
    second = np.diff(slopes)
    deficit = float(max(0.0, -second.min() / Fscale)) if second.size else 0.0
    h3_ok = abs(F0) <= 1e-14 and deficit <= 1e-10 and F.min() >= -1e-12 * Fscale
    checks["H3"] = HypothesisCheck(
        "H3", bool(h3_ok), f"F(0) = {F0:.2e}; convexity deficit {deficit:.2e}",
        deficit, list(u[1:-1][second < -1e-10 * Fscale][:10]))

    # H4: |f^(j)(u)| <= C_j |u|^(5-j), j = 0..4
    worst = 0.0
    bad: list = []
    parts = []
    for j in range(5):
        at0 = abs(float(d[j][u == 0][0]))
        lo = _edge_exponent(u, d[j], where="inner")
        hi = _edge_exponent(u, d[j], where="outer")
        ok_j = at0 <= 1e-12 and lo >= 5 - j - exponent_tol and hi <= 5 - j + exponent_tol
        parts.append(f"j={j}: f(0)={at0:.1e}, exps {lo:.2f}/{hi:.2f}")
        if not ok_j:
            bad.append(j)
        worst = max(worst, at0)
    checks["H4"] = HypothesisCheck("H4", not bad, "; ".join(parts), worst, bad)

    # B1: f^(4)(u) = 0 iff u = 0
    g4 = d[4]
    g4s = max(np.abs(g4).max(), 1e-300)
    zeros_off = u[nz & (np.abs(g4) <= 1e-14 * g4s)]
    pos, neg = u > 0, u < 0
    flips = []
    for mask in (pos, neg):
        s = np.sign(g4[mask])
        idx = np.nonzero(s[1:] * s[:-1] < 0)[0]
        flips.extend(u[mask][idx])
    g40 = abs(float(g4[u == 0][0]))
    b1_wit = sorted(set(float(x) for x in list(zeros_off) + flips))
    b1_ok = not b1_wit and g40 <= 1e-12 * g4s
    checks["B1"] = HypothesisCheck(
        "B1", bool(b1_ok), f"f4(0) = {g40:.2e}; {len(b1_wit)} off-origin zero witnesses",
        float(len(b1_wit)), b1_wit)

    return ValidationReport(nl.label, checks, emp_C)
