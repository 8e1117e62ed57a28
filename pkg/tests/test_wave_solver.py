import numpy as np
import pytest

from wavescatter import _backend
from wavescatter.errors import ConfigurationError
from wavescatter.grids_norms import CauchyData, Grid3D, RadialGrid, energy_linear
from wavescatter.wave_solver import SolverConfig, Stepper3D, solve_linear_radial


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(1.0, cfl_ratio=1.5)
    with pytest.raises(ConfigurationError):
        SolverConfig(1.0, boundary="sideways")
    with pytest.raises(ConfigurationError):
        SolverConfig(1.0, time_step=0.2).step_for(0.1, 1)


def test_3d_cfl_violation():
    with pytest.raises(ConfigurationError):
        Stepper3D(Grid3D(1.0, 10), 0.2)


def test_linear_radial_conserves_energy():
    g = RadialGrid(20.0, 2000)
    d = CauchyData(np.exp(-(g.r - 4) ** 2), np.exp(-(g.r - 5) ** 2), g)
    tr = solve_linear_radial(d, SolverConfig(8.0, snapshot_stride=50))
    E = [energy_linear(tr.snapshot(k)) for k in range(len(tr))]
    assert np.ptp(E) / E[0] < 1e-8


def test_unit_cfl_is_exact_for_dalembert():
    # w = g(t - r) - g(t + r) with g a narrow Gaussian centred away from the origin
    g = RadialGrid(30.0, 3000)
    r = g.r

    def G(x):
        return np.exp(-((x + 8) ** 2))

    def Gp(x):
        return -2 * (x + 8) * G(x)

    phi = np.zeros_like(r)
    psi = np.zeros_like(r)
    phi[1:] = (G(-r[1:]) - G(r[1:])) / r[1:]
    psi[1:] = (Gp(-r[1:]) - Gp(r[1:])) / r[1:]
    phi[0] = -2 * Gp(0.0)
    tr = solve_linear_radial(CauchyData(phi, psi, g), SolverConfig(5.0, snapshot_stride=100))
    t = tr.times[-1]
    exact = np.zeros_like(r)
    exact[1:] = (G(t - r[1:]) - G(t + r[1:])) / r[1:]
    assert np.max(np.abs(tr.u[-1][1:] - exact[1:])) < 1e-6


@pytest.mark.parametrize("periodic", [False, True])
def test_backends_agree(periodic):
    try:
        cy = _backend.get("cython")
    except ImportError:
        pytest.skip("compiled kernels not built")
    npk = _backend.get("numpy")
    rng = np.random.default_rng(0)
    a, b, s = (rng.standard_normal((12, 13, 14)) for _ in range(3))
    o1, o2 = np.zeros_like(a), np.zeros_like(a)
    npk.leapfrog3d(a, b, s, o1, 0.3, 0.01, periodic)
    cy.leapfrog3d(a, b, s, o2, 0.3, 0.01, periodic)
    assert np.max(np.abs(o1 - o2)) < 1e-13
    x, y, z = (rng.standard_normal(50) for _ in range(3))
    p1, p2 = np.zeros(50), np.zeros(50)
    npk.leapfrog1d(x, y, z, p1, 0.9, 0.01)
    cy.leapfrog1d(x, y, z, p2, 0.9, 0.01)
    assert np.max(np.abs(p1 - p2)[1:-1]) < 1e-13


def test_fallback_selected_by_environment():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-c", "import wavescatter; print(wavescatter.BACKEND)"],
                         env={"WAVESCATTER_BACKEND": "numpy", "PATH": ""},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_3d_periodic_plane_wave():
    # u = cos(k x - w t) with the discrete dispersion relation is reproduced exactly
    grid = Grid3D(np.pi, 32)
    h = grid.h
    dt = 0.5 * h
    k = 2
    w = 2 / dt * np.arcsin(dt / h * np.sin(k * h / 2))
    X = grid.x[:, None, None] + 0 * grid.x[None, :, None] + 0 * grid.x[None, None, :]
    st = Stepper3D(grid, dt, "periodic-3d")
    prev, cur = np.cos(k * X + w * dt), np.cos(k * X)
    for _ in range(20):
        out = np.empty_like(cur)
        st.step(prev, cur, None, out)
        prev, cur = cur, out
    assert np.max(np.abs(cur - np.cos(k * X - w * 20 * dt))) < 1e-10
