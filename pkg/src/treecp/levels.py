"""The high-return set of configurations and the level-``m1`` subtree count.

A configuration is *good* when the process started from it keeps the
level ``n1`` occupied, with no gap of ``S`` time units, during
``[0, sqrt(n)]`` with probability above ``1 - exp(-sqrt(n)/2)``.  The count
``Gamma`` is the number of level-``m1`` subtrees whose restricted
configuration is good when seen on a tree of height ``m2 = n - m1``.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from . import stats
from .chain import build_kernel
from .errors import DomainError
from .forward import simulate_forward
from .graph import GraphTopology, build_dary_tree, level_range, subtree_ranges
from .observables import predicate_F
from .parallel import map_trials, per_trial
from .params import Decomposition, ParameterSet, decompose, g_threshold, iroot
from .stats import EstimateReport

Member = Callable[[np.ndarray], bool]


def _height(t: GraphTopology) -> int:
    if t.tree is None:
        raise DomainError("operation needs a rooted d-ary tree")
    return t.tree.height


def estimate_phi(t: GraphTopology, lam: float, a, params: ParameterSet,
                 dec: Optional[Decomposition] = None, trials: int = 1000, seed: int = 0,
                 confidence: float = 0.99, workers: Optional[int] = None) -> EstimateReport:
    """Monte Carlo estimate of ``P[F holds on [0, sqrt(n)]]`` from ``a``."""
    if trials < 1:
        raise DomainError("need at least one trial")
    n = _height(t)
    dec = decompose(n, params) if dec is None else dec
    if dec.n != n:
        raise DomainError("decomposition height differs from the tree height")
    a = t.as_vertex_set(a)
    window = (0.0, math.sqrt(n))

    def one(s):
        return predicate_F(simulate_forward(t, lam, a, window[1], s), dec.n1, params.S, window)

    hits = map_trials(per_trial(one), seed, trials, workers)
    return stats.proportion_report(sum(hits), trials, confidence, (seed, 0, trials),
                                   n1=dec.n1, window=list(window), threshold=g_threshold(n),
                                   per_trial=[bool(x) for x in hits])


def classify_G(phi: EstimateReport, threshold: Optional[float] = None, n: Optional[int] = None) -> bool:
    """Conservative membership: the lower confidence limit of ``phi`` must
    exceed the threshold (default ``1 - exp(-sqrt(n)/2)``)."""
    if threshold is None:
        if n is None:
            threshold = phi.extra["threshold"]
        else:
            threshold = g_threshold(n)
    return phi.ci_low > threshold


@lru_cache(maxsize=64)
def _subtree_index(d: int, n: int, m1: int) -> np.ndarray:
    t = build_dary_tree(d, n)
    lo, hi = level_range(t, m1)
    rows = [np.concatenate([np.arange(a, b) for a, b in subtree_ranges(t, x)]) for x in range(lo, hi)]
    out = np.stack(rows)
    out.flags.writeable = False
    return out


def subtree_configs(t: GraphTopology, config, m1: int) -> np.ndarray:
    """Row ``i``: ``config`` restricted to the subtree of the ``i``-th level-``m1``
    vertex, relabelled as a configuration on a tree of height ``n - m1``."""
    n = _height(t)
    if not 0 <= m1 <= n:
        raise DomainError(f"m1 must lie in [0, {n}]")
    return t.as_vertex_set(config)[_subtree_index(t.tree.degree, n, m1)]


def gamma(t: GraphTopology, config, m1: int, member: Member) -> int:
    """Number of level-``m1`` subtrees whose configuration satisfies ``member``."""
    return int(sum(bool(member(c)) for c in subtree_configs(t, config, m1)))


def classify_H(t: GraphTopology, config, m1: int, member: Member) -> bool:
    return gamma(t, config, m1, member) > 0.75 * t.tree.degree**m1


# -- membership predicates on a tree of height m2 ------------------------------

def goodstart_member(d: int, m2: int, params: ParameterSet) -> Member:
    """More than ``dbar**n1`` infected vertices at level ``n1`` of the subtree."""
    sub = build_dary_tree(d, m2)
    n1 = decompose(m2, params).n1
    lo, hi = level_range(sub, n1)
    need = params.dbar**n1

    def member(c: np.ndarray) -> bool:
        return int(c[lo:hi].sum()) > need

    return member


def root_member(c: np.ndarray) -> bool:
    return bool(c[0])


def phi_member(d: int, m2: int, lam: float, params: ParameterSet, trials: int = 200,
               seed: int = 0) -> Member:
    """Estimated membership in the high-return set of the height-``m2`` tree,
    with common random numbers across calls."""
    sub = build_dary_tree(d, m2)
    dec = decompose(m2, params)

    def member(c: np.ndarray) -> bool:
        if not c.any():
            return False
        return classify_G(estimate_phi(sub, lam, c, params, dec, trials, seed, workers=1))

    return member


# -- domination probe ------------------------------------------------------------

def check_grid(grid: Sequence[float], m2: int) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2 or g[0] < 0:
        raise DomainError("grid needs >= 2 nonnegative times")
    gaps = np.diff(g)
    lo, hi = 0.5 * math.sqrt(m2), math.sqrt(m2)
    if (gaps < lo).any() or (gaps > hi).any():
        raise DomainError(f"grid gaps must lie in [{lo:.4g}, {hi:.4g}]")
    return g


def domination_probe(t: GraphTopology, lam: float, grid: Sequence[float], trials: int,
                     seed: int = 0, params: Optional[ParameterSet] = None,
                     member: Optional[Member] = None, start=None,
                     workers: Optional[int] = None) -> dict:
    """Sample ``Gamma`` along a time grid and set the empirical one-step
    moves beside the comparison-chain kernel.  Diagnostic only."""
    n = _height(t)
    d = t.tree.degree
    params = ParameterSet.for_degree(d) if params is None else params
    m1 = iroot(n, 4)
    m2 = n - m1
    g = check_grid(grid, m2)
    member = goodstart_member(d, m2, params) if member is None else member
    start = t.full_set() if start is None else t.as_vertex_set(start)
    h4 = d**m1

    def one(s):
        traj = simulate_forward(t, lam, start, float(g[-1]), s)
        return [gamma(t, traj.at(x), m1, member) for x in g]

    samples = np.array(map_trials(per_trial(one), seed, trials, workers), dtype=np.int64)
    prev, nxt = samples[:, :-1].ravel(), samples[:, 1:].ravel()
    kernel = build_kernel(n, d, params.cbar, params.sigma, params.theta, "paper")

    rows = []
    for k in range(1, h4 + 1):
        sel = prev == k
        if not sel.any():
            continue
        emp = np.bincount(nxt[sel], minlength=h4 + 1) / sel.sum()
        ker = kernel.row(k)
        emp_tail = np.cumsum(emp[::-1])[::-1]
        ker_tail = np.cumsum(ker[::-1])[::-1]
        rows.append({"state": k, "count": int(sel.sum()),
                     "empirical": emp.tolist(), "kernel": ker.tolist(),
                     "min_tail_gap": float((emp_tail - ker_tail).min())})
    drops = prev - nxt
    alive = prev > 0
    jump_tail = []
    for a in range(1, h4 + 1):
        jump_tail.append({"a": a,
                          "empirical": float((drops[alive] >= a).mean()) if alive.any() else float("nan"),
                          "binomial": float(kernel.jump.sf(a - 1))})
    return {"m1": m1, "m2": m2, "grid": g.tolist(), "gamma": samples,
            "rows": rows, "jump_tail": jump_tail,
            "dominates": all(r["min_tail_gap"] >= 0 for r in rows)}
