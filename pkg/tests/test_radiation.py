import numpy as np
import pytest

from conftest import field
from wavescatter.errors import NumericalGuardError, PreconditionError
from wavescatter.grids_norms import CauchyData, RadialGrid
from wavescatter.nonlinearity import power, zero
from wavescatter.radiation import (RadialWindow, RadiationFieldData, extend_outgoing,
                                   inverse_radiation, project_parity, radiation_linear_exact,
                                   radiation_semilinear, scatter_from_past, scattering_forward)


@pytest.fixture(scope="module")
def Y():
    return field(3.0, 0.0, 2.0, s_max=4.0)


def test_field_arithmetic_and_norm(Y):
    Z = 2 * Y - Y
    assert np.allclose(Z.values, Y.values)
    assert Y.mean() == pytest.approx(0.0, abs=1e-12)
    assert (2 * Y).norm() == pytest.approx(2 * Y.norm())


def test_field_needs_uniform_grid():
    with pytest.raises(ValueError):
        RadiationFieldData([0, 1, 3], [0, 0, 0])


def test_window_covers_backscatter(Y):
    win = RadialWindow.build(0.02, 4.0, T=10.0)
    assert win.n_space * win.h >= 2 * win.T + 4.0


def test_free_scattering_is_minus_identity(Y):
    win = RadialWindow.for_field(Y, T=5.0)
    A = scattering_forward(zero(), Y, win)
    assert np.max(np.abs(A.values + win.samples(Y))) < 1e-12


def test_inverse_requires_mean_zero():
    s = np.arange(-100, 101) * 0.02
    with pytest.raises(PreconditionError):
        inverse_radiation(power(), RadiationFieldData(s, np.exp(-s**2)))


def test_inverse_guard_on_large_data(Y):
    with pytest.raises(NumericalGuardError) as err:
        inverse_radiation(power(), 20 * Y, T=5.0)
    assert "residuals" in err.value.diagnostics


def test_from_past_matches_fixed_point(Y):
    win = RadialWindow.for_field(Y, T=6.0)
    A = scattering_forward(power(), 0.3 * Y, win, tol=1e-14, max_iter=40)
    B = scatter_from_past(power(), 0.3 * Y, win)
    assert np.max(np.abs(A.values - B.values)) < 1e-10


def test_lattice_and_radon_routes_agree():
    g = RadialGrid(8.0, 400)
    d = CauchyData(0.5 * np.exp(-(g.r - 3) ** 2), np.zeros(401), g)
    win = RadialWindow.for_data(d, T=6.0)
    a = radiation_semilinear(power(), d, "-", win)
    b = radiation_semilinear(power(), d, "-", win, route="radon")
    assert np.sqrt(np.sum((a.values - b.values) ** 2)) / np.sqrt(np.sum(a.values**2)) < 1e-2


def test_linear_exact_sign_convention():
    # u = exp(-r^2) at rest: the backward and forward fields are mirror images with opposite sign
    g = RadialGrid(8.0, 1600)
    d = CauchyData(np.exp(-g.r**2), np.zeros(1601), g)
    m = radiation_linear_exact(d, "-")
    p = radiation_linear_exact(d, "+")
    assert np.allclose(m.values, -p.values, atol=1e-12)


def test_project_parity_removes_both_sums():
    F = np.random.default_rng(0).standard_normal(101)
    P, corr = project_parity(F)
    assert abs(P[::2].sum()) < 1e-12 and abs(P[1::2].sum()) < 1e-12
    assert corr > 0


def test_extend_outgoing_reads_trace():
    trace = np.arange(10.0)
    W = np.zeros(5)
    ext = extend_outgoing(W, trace, n=7, n_first=0)
    assert np.array_equal(ext[5:], trace[6::-1][:7])
