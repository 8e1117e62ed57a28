import numpy as np
import pytest

from wavescatter.conormal_geometry import (ConeConfig, cutoff, fibonacci_sphere, on_cones,
                                           plane_patterns, quadruple_interaction_geometry,
                                           smoothstep, solve_transport, spherical_wave_eval,
                                           triple_config, triple_interaction_geometry, upsilon)
from wavescatter.errors import PreconditionError


def test_smoothstep_is_flat_at_the_ends():
    x = np.linspace(0, 1, 1001)
    S = smoothstep(x)
    assert S[0] == 0 and S[-1] == 1 and np.all(np.diff(S) > -1e-9)
    d = np.gradient(S, x)
    assert abs(d[0]) < 1e-6 and abs(d[-1]) < 1e-6


def test_cutoff_plateau():
    x = np.array([-0.4, 0.0, 0.5, 1.0, 1.5])
    c = cutoff(x, 1.0)
    assert np.allclose(c[:3], 1.0) and c[3] == 0 and c[4] == 0


def test_cone_config_validation():
    with pytest.raises(PreconditionError):
        ConeConfig([[0, 0, 0]], [0.0, 1.0])
    with pytest.raises(PreconditionError):
        ConeConfig([[0, 0, 0]], [0.0], m=0)
    assert triple_config().distinct()
    assert not ConeConfig([[0, 0, 0], [0, 0, 0]], [0, 0]).distinct()


def test_wave_and_its_field():
    cfg = triple_config()
    with pytest.raises(PreconditionError):
        spherical_wave_eval(cfg, 1, 0.0, np.array([2.0, 0.0, 0.0]))
    # before the focus the wave is the incoming profile G(t + d)/d
    z = np.array([[0.0, 1.5, 0.0]])
    v = spherical_wave_eval(cfg, 0, -1.2, z)
    assert v[0] == pytest.approx(cfg.profile(np.array([0.3]))[0] / 1.5)
    s = np.linspace(-3, 3, 7)
    om = np.array([1.0, 0.0, 0.0])
    assert np.allclose(upsilon(cfg, 1, s, om), cfg.profile_d(s - 2.0))


def test_fibonacci_sphere_unit():
    w = fibonacci_sphere(50)
    assert np.allclose(np.linalg.norm(w, axis=1), 1)


def test_triple_example_pattern():
    tg = triple_interaction_geometry(1.0, 1.0, 0.0)
    Q = tg.q_inf([0.0], 32)
    w = Q.points[:, 1:]
    assert np.allclose(w[:, 2], 0)
    assert np.allclose(Q.points[:, 0], -np.sqrt(2) - w[:, 0] - w[:, 1])
    assert Q.max_residual() < 1e-12
    with pytest.raises(PreconditionError):
        triple_interaction_geometry(0.0, 1.0)


def test_pattern_membership_scan():
    tg = triple_interaction_geometry(1.0, 1.0, 0.0)
    Q = tg.q_inf([0.0], 360)
    planes = plane_patterns(tg.cones(), 10)
    hits = np.zeros(len(Q.points), dtype=bool)
    for P in planes:
        hits |= P.contains(Q.points[:, 0], Q.points[:, 1:], tol=1e-6)
    assert hits.mean() < 0.05


def test_quadruple_gamma():
    qg = quadruple_interaction_geometry(1.0, 2.0, 0.5, 0.3)
    assert on_cones(np.vstack([qg.gamma(-1), qg.gamma(1)]), qg.cones()).max() < 1e-12
    assert qg.t0(-1) == pytest.approx(0.3 - np.sqrt(1 + 4 + 0.25))


def test_transport_plus_family_matches_minus():
    r = np.linspace(0.05, 10, 2001)
    g0 = np.exp(-(r - 3) ** 2)
    minus = solve_transport(g0[None], r, 2.0, 2)
    plus = solve_transport(g0[None], r, 2.0, 2, family="+", beta_minus=minus.beta)
    assert np.allclose(plus.beta[:, 2], minus.beta[:, 2])
    with pytest.raises(PreconditionError):
        solve_transport(np.ones((1, r.size)), r, 2.0, 1)
    with pytest.raises(PreconditionError):
        solve_transport(g0[None], r, 2.0, 1, family="+")
