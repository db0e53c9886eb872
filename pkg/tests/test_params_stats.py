import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treecp import stats
from treecp.errors import ConstructionError, DomainError
from treecp.params import ParameterSet, decompose, g_threshold, iroot


@given(st.integers(0, 10**12), st.integers(1, 7))
def test_iroot(n, k):
    r = iroot(n, k)
    assert r**k <= n < (r + 1) ** k


@pytest.mark.parametrize("d", [2, 3, 4, 6])
def test_for_degree_valid(d):
    p = ParameterSet.for_degree(d)
    assert 1 < 1 / p.theta < p.v0 ** (1 / 6) < p.v1 ** 0.5 < p.dbar


def test_parameter_errors():
    with pytest.raises(ConstructionError):
        ParameterSet(2, 0.5, 2.0, 3.0)
    with pytest.raises(ConstructionError):
        ParameterSet.for_degree(2, sigma=1.5)
    with pytest.raises(ConstructionError):
        ParameterSet.for_degree(2, S=0)
    with pytest.raises(ConstructionError):
        ParameterSet.for_degree(1)


@settings(max_examples=50)
@given(st.integers(2, 400), st.integers(2, 4))
def test_decompose_adds_up(n, d):
    dec = decompose(n, ParameterSet.for_degree(d))
    assert dec.n1 + dec.n2 == n
    assert dec.m1 + dec.m2 == n
    assert dec.m1 == iroot(n, 4)
    assert 1 <= dec.n1 < n


def test_decompose_errors():
    with pytest.raises(DomainError):
        decompose(1, ParameterSet.for_degree(2))


def test_g_threshold():
    assert g_threshold(4) == pytest.approx(1 - math.exp(-1))


def test_wilson():
    lo, hi = stats.wilson_interval(0, 100)
    assert lo == 0 and 0 < hi < 0.07
    lo, hi = stats.wilson_interval(50, 100)
    assert lo < 0.5 < hi
    r = stats.proportion_report(3, 10, seeds=(1, 0, 10), foo=1)
    assert r.estimate == 0.3 and r.extra["foo"] == 1


def test_mean_quantile_intervals():
    x = np.random.default_rng(0).exponential(size=5000)
    m, lo, hi = stats.mean_interval(x)
    assert lo < 1 < hi
    q, lo, hi = stats.quantile_interval(x, 0.5)
    assert lo <= math.log(2) <= hi


def test_ks():
    x = np.random.default_rng(1).exponential(size=4000)
    assert stats.ks_distance_exp1(x) < 0.03
    assert stats.ks_distance_exp1(2 * x) > 0.2
    _, p = stats.ks_two_sample(x[:2000], x[2000:])
    assert p > 1e-3


def test_linear_fit():
    x = np.arange(10.0)
    out = stats.linear_fit(x, 2 * x + 1)
    assert np.allclose(np.asarray(out, dtype=float)[:2], [2, 1]) or np.allclose(np.asarray(out, dtype=float)[:2], [1, 2])
