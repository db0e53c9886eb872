import numpy as np
import pytest

from treecp.errors import DomainError
from treecp.graph import build_dary_tree, level, subtree_ids
from treecp.levels import (
    check_grid, classify_G, classify_H, domination_probe, estimate_phi, gamma, goodstart_member,
    root_member, subtree_configs,
)
from treecp.params import ParameterSet, decompose, g_threshold
from treecp.stats import proportion_report


def test_subtree_configs_match_relabel():
    t = build_dary_tree(2, 4)
    rng = np.random.default_rng(0)
    c = rng.random(t.n_vertices) < 0.5
    rows = subtree_configs(t, c, 1)
    assert rows.shape == (2, 15)
    for i, x in enumerate(np.flatnonzero(level(t, 1))):
        assert np.array_equal(rows[i], c[subtree_ids(t, x)])
    with pytest.raises(DomainError):
        subtree_configs(t, c, 5)


def test_gamma_root_member():
    t = build_dary_tree(2, 3)
    c = t.vertex_set([3, 5, 6])
    assert gamma(t, c, 2, root_member) == 3
    assert not classify_H(t, c, 2, root_member)
    assert classify_H(t, level(t, 2), 2, root_member)
    assert gamma(t, t.empty_set(), 1, root_member) == 0


def test_goodstart_member():
    p = ParameterSet.for_degree(2)
    m2 = 4
    n1 = decompose(m2, p).n1
    sub = build_dary_tree(2, m2)
    member = goodstart_member(2, m2, p)
    assert member(level(sub, n1))
    assert not member(sub.empty_set())


def test_classify_G_uses_lower_limit():
    hi = proportion_report(1000, 1000, threshold=0.5)
    lo = proportion_report(52, 100, threshold=0.5)
    assert classify_G(hi)
    assert not classify_G(lo)
    assert classify_G(hi, n=4) == (hi.ci_low > g_threshold(4))


def test_phi_extremes():
    t = build_dary_tree(2, 4)
    p = ParameterSet.for_degree(2)
    empty = estimate_phi(t, 2.0, t.empty_set(), p, trials=50, seed=1)
    assert empty.estimate == 0.0 and not classify_G(empty)
    full = estimate_phi(t, 8.0, t.full_set(), p, trials=100, seed=1)
    assert full.estimate > 0.9
    assert full.extra["window"] == [0.0, 2.0]
    again = estimate_phi(t, 8.0, t.full_set(), p, trials=100, seed=1, workers=3)
    assert again.estimate == full.estimate
    with pytest.raises(DomainError):
        estimate_phi(t, 1.0, t.full_set(), p, trials=0)


def test_check_grid():
    assert check_grid([0, 2, 4], 4).tolist() == [0, 2, 4]
    with pytest.raises(DomainError):
        check_grid([0, 5], 4)
    with pytest.raises(DomainError):
        check_grid([0, 0.5], 4)
    with pytest.raises(DomainError):
        check_grid([1], 4)


def test_domination_probe_shapes():
    t = build_dary_tree(2, 6)
    out = domination_probe(t, 4.0, [0, 1.5, 3.0], trials=20, seed=2)
    assert out["m1"] == 1 and out["m2"] == 5
    assert out["gamma"].shape == (20, 3)
    assert ((out["gamma"] >= 0) & (out["gamma"] <= 2)).all()
    for row in out["rows"]:
        assert abs(sum(row["empirical"]) - 1) < 1e-9
