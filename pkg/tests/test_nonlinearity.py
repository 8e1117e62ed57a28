import numpy as np
import pytest

from wavescatter.nonlinearity import (antiderivative, evaluate, from_callables, from_spec,
                                      perturbed, power, validate_hypotheses, zero)

U = np.linspace(-2, 2, 401)


@pytest.mark.parametrize("nl", [power(), power(c=2.5), perturbed(1.0, 0.5), perturbed(0.7, -0.3)])
def test_derivative_tower_is_consistent(nl):
    h = 1e-5
    for j in range(5):
        fd = (nl.derivatives[j](U + h) - nl.derivatives[j](U - h)) / (2 * h)
        assert np.allclose(fd, nl.derivatives[j + 1](U), rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("nl", [power(), perturbed(1.0, 0.5)])
def test_antiderivative(nl):
    h = 1e-5
    fd = (antiderivative(nl, U + h) - antiderivative(nl, U - h)) / (2 * h)
    assert np.allclose(fd, evaluate(nl, U), atol=1e-6)
    assert antiderivative(nl, 0.0) == 0.0


def test_perturbed_fourth_derivative_formula():
    nl = perturbed(1.0, 0.4)
    ref = 120 * U * (1 + 0.4 * U**2 / (1 + U**2))
    assert np.allclose(nl.derivatives[4](U), ref, rtol=1e-12, atol=1e-12)
    for j in range(4):
        assert abs(nl.derivatives[j](np.array([0.0]))[0]) < 1e-15


def test_perturbed_series_and_closed_form_agree_at_cut():
    nl = perturbed(1.0, 0.5)
    u = np.array([0.5 - 1e-12, 0.5 + 1e-12])
    for j in range(6):
        v = nl.derivatives[j](u)
        assert abs(v[0] - v[1]) < 1e-9


def test_power_integer_exponents_exact():
    u = np.array([-1.5, -0.25, 0.0, 0.75, 3.0])
    f = power(c=2.0, p=5)
    assert np.array_equal(f.derivatives[0](u), 2.0 * u * u * u * u * u)
    assert np.all(f.derivatives[5](u) == 240.0)


def test_bad_parameters():
    with pytest.raises(ValueError):
        power(c=-1)
    with pytest.raises(ValueError):
        perturbed(z0=1.0)
    with pytest.raises(ValueError):
        from_spec({"name": "nope"})
    with pytest.raises(ValueError):
        from_callables("x", [np.sin])


def test_from_spec_and_scaling():
    nl = from_spec({"name": "power", "c": 2.0})
    assert evaluate(nl, 1.0) == 2.0
    assert evaluate(nl.scaled(0.5), 1.0) == 1.0
    assert zero().is_zero and not power().is_zero


def test_validation_rejects_bad_grids():
    with pytest.raises(ValueError):
        validate_hypotheses(power(), np.linspace(0, 1, 11))
    with pytest.raises(ValueError):
        validate_hypotheses(power(), np.linspace(-1, 1, 10))


def test_validation_reports():
    u = np.linspace(-10, 10, 2001)
    good = validate_hypotheses(perturbed(), u)
    assert good.all_passed
    cubic = validate_hypotheses(power(p=3), u)
    assert not cubic.checks["H1"].passed
    d = cubic.as_dict()
    assert d["all_passed"] is False and set(d["checks"]) >= {"H1", "H2", "H3", "H4", "B1"}
