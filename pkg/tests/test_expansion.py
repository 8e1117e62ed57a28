import numpy as np
import pytest

from wavescatter.errors import DependencyError
from wavescatter.expansion import (MultiIndex, TruncatedAlgebra, all_indices, assemble_source,
                                   brute_force_source, is_downward_closed, loglog_slope,
                                   ordered_decompositions)
from wavescatter.nonlinearity import perturbed, power


def test_multi_index_arithmetic():
    a, b = MultiIndex(1, 0, 2, 0), MultiIndex(0, 1, 1, 0)
    assert a + b == MultiIndex(1, 1, 3, 0)
    assert (a - MultiIndex(1, 0, 0, 0)).order == 2
    assert b <= a + b and not a <= b
    assert a.label() == "1020"
    with pytest.raises(ValueError):
        MultiIndex(-1, 0)


def test_index_sets():
    idx = all_indices(4)
    assert len(idx) == 69
    assert is_downward_closed(idx)
    assert len(all_indices(4, binary=True)) == 15
    assert not is_downward_closed([MultiIndex(1, 1)])


@pytest.mark.parametrize("alpha,k,count", [((1, 1, 1, 1), 4, 24), ((1, 1, 1, 1), 2, 14),
                                           ((2, 0), 2, 1), ((1, 1, 0), 3, 0)])
def test_ordered_decomposition_counts(alpha, k, count):
    assert len(ordered_decompositions(MultiIndex(alpha), k)) == count


def test_quadruple_term_coefficient():
    rng = np.random.default_rng(3)
    u0 = rng.standard_normal(7)
    mem = {a: np.zeros(7) for a in all_indices(4)}
    ws = [rng.standard_normal(7) for _ in range(4)]
    for j in range(4):
        mem[MultiIndex.unit(j)] = ws[j]
    nl = power()
    src = brute_force_source(MultiIndex(1, 1, 1, 1), mem, nl, u0)
    assert np.allclose(src, -nl.derivatives[4](u0) * ws[0] * ws[1] * ws[2] * ws[3])


def test_pair_term():
    rng = np.random.default_rng(4)
    u0 = rng.standard_normal(5)
    mem = {a: rng.standard_normal(5) for a in all_indices(2, 2)}
    nl = perturbed()
    src = assemble_source(MultiIndex(1, 1), mem, nl, u0)
    assert np.allclose(src, -nl.derivatives[2](u0) * mem[MultiIndex(1, 0)] * mem[MultiIndex(0, 1)])


def test_missing_prerequisite():
    mem = {MultiIndex(1, 0): np.ones(3)}
    with pytest.raises(DependencyError):
        assemble_source(MultiIndex(1, 1), mem, power(), np.zeros(3))


def test_algebra_matches_enumerator_on_three_parameters():
    rng = np.random.default_rng(5)
    idx = all_indices(3)
    u0 = 0.3 * rng.standard_normal(20)
    mem = {a: rng.standard_normal(20) for a in idx}
    alg = TruncatedAlgebra(idx)
    S = alg.sources(np.stack([mem[a] for a in idx]), u0, perturbed())
    for a in idx:
        assert np.allclose(S[alg.pos[a]], brute_force_source(a, mem, perturbed(), u0), atol=1e-12)


def test_loglog_slope():
    x = np.array([0.2, 0.1, 0.05])
    assert loglog_slope(x, 3 * x**5) == pytest.approx(5)
    with pytest.raises(ValueError):
        loglog_slope(x[:2], x[:2])
    with pytest.raises(ValueError):
        loglog_slope(x, -x)
