"""Statistics of contact-process trajectories and their Monte Carlo estimators.

Every estimator is trial-parallel: trial ``i`` uses the seed derived from
``(seed, i)`` (see :mod:`treecp._rng`), so results do not depend on the
number of workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import stats
from .errors import DataError, DomainError, PreconditionError
from .forward import Trajectory, extinction_times, simulate_forward
from .graph import GraphTopology, build_dary_tree, depth, dist, level, level_range
from .harris import sample_harris, singleton_processes
from .parallel import map_trials, per_trial
from .params import ParameterSet
from .stats import EstimateReport


def lambda2_upper(d: int) -> float:
    """Upper bound on the second critical value of the infinite d-ary tree."""
    return 1.0 / (math.sqrt(d) - 1.0)


#: Lower bound on the critical value of the one-dimensional lattice.
LAMBDA1_Z_LOWER = 1.539
SUBCRITICAL_PROBE = 0.3


def supercritical_probe(d: int) -> float:
    """Default supercritical test rate, twice the upper bound on the second
    critical value."""
    return 2 * lambda2_upper(d)


def regime(lam: float, d: int) -> str:
    """Regime tag: ``supercritical`` when ``lam`` exceeds the proven upper
    bound on the second critical value, ``subcritical`` for the desk-scale
    probes ``lam <= 0.3``, else ``unclassified``."""
    if lam > lambda2_upper(d):
        return "supercritical"
    if lam <= SUBCRITICAL_PROBE:
        return "subcritical"
    return "unclassified"


# -- extinction ---------------------------------------------------------------

@dataclass(frozen=True)
class ExtinctionSample:
    tau: float
    censored: bool
    seed: int


def extinction_time(t: GraphTopology, lam: float, a, horizon: float, seed: int) -> ExtinctionSample:
    """First time the process from ``a`` is empty, censored at ``horizon``."""
    a = t.as_vertex_set(a)
    if not a.any():
        return ExtinctionSample(0.0, False, int(seed))
    tau, cen = extinction_times(t, lam, a, horizon, [seed])
    return ExtinctionSample(float(tau[0]), bool(cen[0]), int(seed))


def extinction_samples(t: GraphTopology, lam: float, a, horizon: float, trials: int,
                       seed: int, workers: Optional[int] = None) -> list[ExtinctionSample]:
    a = t.as_vertex_set(a)

    def chunk(seeds):
        tau, cen = extinction_times(t, lam, a, horizon, seeds)
        return [ExtinctionSample(float(x), bool(c), int(s)) for x, c, s in zip(tau, cen, seeds)]

    return map_trials(chunk, seed, trials, workers)


def _uncensored(samples: Sequence[ExtinctionSample], max_censored: float = 0.01) -> np.ndarray:
    if not samples:
        raise DataError("no samples")
    cen = sum(s.censored for s in samples)
    if cen > max_censored * len(samples):
        raise DataError(
            f"{cen}/{len(samples)} samples censored (cap {max_censored:.0%}); horizon too short"
        )
    return np.array([s.tau for s in samples if not s.censored])


# -- attempt counter and the trajectory predicate ---------------------------

def count_attempts(intervals: Sequence[tuple[float, float]], t0: float, t: float) -> int:
    """Greedy count of start times ``s_1 < ... < s_k < t - t0`` with gaps
    ``>= t0``, each inside an occupancy interval ``[a, b)``.

    Within one interval the starts ``s0, s0 + t0, ...`` are counted by
    multiplication, so rounding does not accumulate over long runs.
    """
    if not 0 < t0 < t:
        raise DomainError("need 0 < t0 < t")
    last = t - t0
    k = 0
    u = 0.0
    j = 0
    while True:
        while j < len(intervals) and intervals[j][1] <= u:
            j += 1
        if j == len(intervals):
            return k
        s0 = max(u, intervals[j][0])
        limit = min(intervals[j][1], last)
        if not s0 < limit:
            return k
        m = max(1, math.ceil((limit - s0) / t0))
        while m > 1 and not s0 + (m - 1) * t0 < limit:
            m -= 1
        while s0 + m * t0 < limit:
            m += 1
        k += m
        u = s0 + m * t0


def attempt_counter(traj: Trajectory, target, t0: float, t: float) -> int:
    """Maximal number of disjoint length-``t0`` windows in ``[0, t]`` whose
    starting points see ``target`` infected."""
    if t > traj.horizon:
        raise DomainError("t exceeds the trajectory horizon")
    return count_attempts(traj.occupancy(target), t0, t)


def gaps_within(intervals, a: float, b: float) -> list[float]:
    """Lengths of the maximal unoccupied stretches of ``[a, b]``."""
    gaps = []
    cursor = a
    for s, e in intervals:
        if e <= a or s >= b:
            continue
        if s > cursor:
            gaps.append(s - cursor)
        cursor = max(cursor, e)
    if b > cursor:
        gaps.append(b - cursor)
    return gaps


def f_holds(intervals, S: float, a: float, b: float) -> bool:
    """Every closed window of length ``S`` inside ``[a, b]`` meets an
    occupancy interval.  A gap of exactly ``S`` fails; for ``S >= b - a``
    the whole window is the only test window."""
    if not a < b:
        raise DomainError("window needs a < b")
    if S >= b - a:
        return any(s <= b and e > a for s, e in intervals)
    return all(g < S for g in gaps_within(intervals, a, b))


def predicate_F(traj: Trajectory, n1: int, S: float, window: tuple[float, float]) -> bool:
    """Whether level ``n1`` is never left uninfected for ``S`` time units in ``window``."""
    a, b = window
    if a < 0 or b > traj.horizon:
        raise DomainError("window must lie inside the trajectory horizon")
    return f_holds(traj.occupancy(level(traj.topology, n1)), S, a, b)


def first_hit(traj: Trajectory, event: Callable[[np.ndarray], bool]) -> float:
    """``inf{t : event(xi_t)}`` along ``traj`` (``inf`` if never)."""
    for time, config in traj.configurations():
        if event(config):
            return time
    return math.inf


def check_rep_bound(t: GraphTopology, lam: float, a, target, t0: float,
                    event: Callable[[np.ndarray], bool], eps0: float, t_end: float,
                    trials: int, seed: int = 0, n_attempts: int = 1,
                    confidence: float = 0.99, workers: Optional[int] = None) -> EstimateReport:
    """Estimate ``P[kappa > t_end, N >= n_attempts]`` and compare it with
    ``(1 - eps0) ** n_attempts``; ``kappa`` is the hitting time of ``event``
    and ``N`` the attempt counter of ``target`` with window ``t0``."""
    if trials < 1:
        raise DomainError("need at least one trial")
    if not 0 <= eps0 <= 1:
        raise DomainError("eps0 must lie in [0, 1]")
    if not 0 < t0 < t_end:
        raise DomainError("need 0 < t0 < t_end")
    a = t.as_vertex_set(a)
    target = t.as_vertex_set(target)

    def one(s):
        traj = simulate_forward(t, lam, a, t_end, s)
        if first_hit(traj, event) <= t_end:
            return False
        return attempt_counter(traj, target, t0, t_end) >= n_attempts

    hits = map_trials(per_trial(one), seed, trials, workers)
    bound = (1 - eps0) ** n_attempts
    rep = stats.proportion_report(sum(hits), trials, confidence, (seed, 0, trials), bound=bound,
                                  per_trial=[bool(x) for x in hits])
    rep.extra["consistent"] = rep.ci_low <= bound
    return rep


# -- level-one estimators ---------------------------------------------------

def spread_event_probability(t: GraphTopology, lam: float, a, n1: int, params: ParameterSet,
                             trials: int, seed: int = 0, confidence: float = 0.99,
                             workers: Optional[int] = None) -> EstimateReport:
    """``P[|xi_s meets level n1| >= (2d/3)**n1 for some s <= (ell + S/2K) n1]``."""
    a = t.as_vertex_set(a)
    near = [v for v in np.flatnonzero(a) if depth(t, int(v)) <= n1]
    if not near:
        raise PreconditionError("A must meet the ball B(root, n1)")
    d = t.tree.degree
    t_max = (params.ell + params.S / (2 * params.K)) * n1
    need = (2 * d / 3) ** n1
    lvl = level(t, n1)
    bound = params.cbar * params.theta**n1 * params.sigma

    def one(s):
        if t_max == 0:
            return (a & lvl).sum() >= need
        _, counts = simulate_forward(t, lam, a, t_max, s).restrict(lvl).sizes()
        return counts.max() >= need

    hits = map_trials(per_trial(one), seed, trials, workers)
    rep = stats.proportion_report(sum(hits), trials, confidence, (seed, 0, trials),
                                  bound=bound, time=t_max, threshold=need,
                                  per_trial=[bool(x) for x in hits])
    rep.extra["consistent"] = rep.ci_high >= bound
    return rep


def root_reinfection_curve(t: GraphTopology, lam: float, S: float, imax: int, trials: int,
                           seed: int = 0, K: float = 1.0, confidence: float = 0.99,
                           workers: Optional[int] = None) -> dict:
    """``P[xi^o_{iS}(o) = 1]`` for ``i = 0..imax`` and the companion
    ``P[|xi^o_{Sn/2K} meets the leaves| > (2d/3)**n]``."""
    if imax < 0 or S <= 0:
        raise DomainError("need imax >= 0 and S > 0")
    n = t.tree.height if t.tree else 0
    d = t.tree.degree if t.tree else 2
    leaf_time = S * n / (2 * K)
    horizon = max(imax * S, leaf_time)
    leaves = level(t, n) if t.tree else t.full_set()
    need = (2 * d / 3) ** n
    root = [0]

    def one(s):
        if horizon == 0:
            return [True] * (imax + 1), bool(leaves[0] and 1 > need)
        traj = simulate_forward(t, lam, root, horizon, s)
        curve = [bool(traj.at(i * S)[0]) for i in range(imax + 1)]
        return curve, bool((traj.at(leaf_time) & leaves).sum() > need)

    rows = map_trials(per_trial(one), seed, trials, workers)
    hits = np.array([r[0] for r in rows], dtype=bool)
    curve = [stats.proportion_report(int(hits[:, i].sum()), trials, confidence, (seed, 0, trials), time=i * S)
             for i in range(imax + 1)]
    leaf = stats.proportion_report(sum(r[1] for r in rows), trials, confidence, (seed, 0, trials),
                                   time=leaf_time, threshold=need)
    return {"curve": curve, "leaf_spread": leaf}


def point_to_point_probability(t: GraphTopology, lam: float, x: int, y: int, params: ParameterSet,
                               trials: int, seed: int = 0, confidence: float = 0.99,
                               workers: Optional[int] = None) -> EstimateReport:
    """``P[xi^x_{ell * dist(x, y)}(y) = 1]`` against ``cbar * theta**dist``."""
    k = dist(t, x, y)
    if k < 0:
        raise DomainError("x and y are disconnected")
    when = params.ell * k
    bound = params.cbar * params.theta**k

    def one(s):
        if when == 0:
            return True
        return bool(simulate_forward(t, lam, [x], when, s).at(when)[y])

    hits = map_trials(per_trial(one), seed, trials, workers)
    rep = stats.proportion_report(sum(hits), trials, confidence, (seed, 0, trials),
                                  bound=bound, time=when, distance=k,
                                  per_trial=[bool(x) for x in hits])
    rep.extra["consistent"] = rep.ci_high >= bound
    return rep


# -- coupling -----------------------------------------------------------------

def discrepancy_indicators(h, check_times) -> np.ndarray:
    """Per check time: some singleton process is nonempty yet differs from
    the process started from every vertex."""
    reach = singleton_processes(h, check_times)
    out = []
    for r in reach:
        full = r.any(axis=0)
        alive = r.any(axis=1)
        differs = (r != full[None, :]).any(axis=1)
        out.append(bool((alive & differs).any()))
    return np.array(out, dtype=bool)


def coupling_discrepancy(t: GraphTopology, lam: float, t_check, trials: int, seed: int = 0,
                         confidence: float = 0.99, workers: Optional[int] = None) -> dict:
    """Fraction of shared-Harris trials with a discrepancy at each check time."""
    checks = np.sort(np.atleast_1d(np.asarray(t_check, dtype=float)))
    if checks[0] < 0:
        raise DomainError("check times must be nonnegative")
    horizon = float(checks[-1]) if checks[-1] > 0 else 1.0

    def one(s):
        return discrepancy_indicators(sample_harris(t, lam, horizon, s), checks)

    rows = np.array(map_trials(per_trial(one), seed, trials, workers), dtype=bool).reshape(trials, len(checks))
    reports = [stats.proportion_report(int(rows[:, i].sum()), trials, confidence, (seed, 0, trials),
                                       t_check=float(c)) for i, c in enumerate(checks)]
    est = [r.estimate for r in reports]
    return {
        "t_check": checks.tolist(),
        "reports": reports,
        "indicators": rows,
        "nonincreasing": all(b <= a for a, b in zip(est, est[1:])),
    }


# -- extinction-time laws ------------------------------------------------------

def estimate_bstar(d: int, lam: float, ns: Sequence[int], q: float = 0.5, trials: int = 1000,
                   seed: int = 0, horizon: float = 1e6, confidence: float = 0.99,
                   workers: Optional[int] = None) -> EstimateReport:
    """Per-height ``q``-quantiles of ``tau/n`` from full occupancy and a
    plateau estimate from the fit ``quantile(n) = b + c / n``."""
    ns = list(ns)
    if not ns or any(n < 1 for n in ns):
        raise DomainError("heights must be >= 1 (tau/n is undefined at n = 0)")
    if not 0 < q < 1:
        raise DomainError("q must lie in (0, 1)")
    table = []
    for i, n in enumerate(ns):
        t = build_dary_tree(d, n)
        samples = extinction_samples(t, lam, t.full_set(), horizon, trials, seed + i, workers)
        ratio = _uncensored(samples) / n
        est, lo, hi = stats.quantile_interval(ratio, q, confidence)
        table.append({"n": n, "quantile": est, "ci_low": lo, "ci_high": hi, "seed": seed + i,
                      "samples": [s.tau for s in samples]})
    x = np.array([1.0 / row["n"] for row in table])
    y = np.array([row["quantile"] for row in table])
    if len(ns) >= 3:
        half = np.array([(row["ci_high"] - row["ci_low"]) / 2 for row in table])
        w = 1.0 / np.maximum(half, 1e-12) ** 2
        b, _, se_b, _ = stats.linear_fit(x, y, w)
        z = stats._z(confidence)
        lo, hi = b - z * se_b, b + z * se_b
    else:
        b = lo = hi = float(y[-1])
        lo, hi = table[-1]["ci_low"], table[-1]["ci_high"]
    return EstimateReport(b, min(lo, b), max(hi, b), trials * len(ns), (seed, 0, trials), confidence,
                          {"table": table, "q": q, "lambda": lam, "d": d, "regime": regime(lam, d)})


@dataclass(frozen=True)
class ExpoTest:
    statistic: float
    passed: bool
    n_samples: int
    mean: float
    threshold: float


def exponentiality_test(samples: Sequence[ExtinctionSample], threshold: float = 0.03,
                        min_samples: int = 100, max_censored: float = 0.01) -> ExpoTest:
    """KS distance between the law of ``tau / mean(tau)`` and Exp(1)."""
    tau = _uncensored(samples, max_censored)
    if tau.size < min_samples:
        raise DataError(f"need >= {min_samples} uncensored samples, got {tau.size}")
    mean = float(tau.mean())
    if mean <= 0:
        raise DataError("sample mean must be positive")
    ks = stats.ks_distance_exp1(tau / mean)
    return ExpoTest(ks, ks <= threshold, int(tau.size), mean, threshold)


def attract_inequality_check(t: GraphTopology, lam: float, s_grid=None, trials: int = 1000,
                             seed: int = 0, horizon: float = 1e6, s_factors=None,
                             confidence: float = 0.99, workers: Optional[int] = None) -> dict:
    """Compare ``P[tau <= s]`` with ``s / E[tau]`` from full occupancy.

    ``s_grid`` gives absolute times; ``s_factors`` gives multiples of the
    estimated mean.  A violation is significant when the lower confidence
    limit of ``P[tau <= s]`` exceeds the upper confidence limit of ``s / E``.
    """
    samples = extinction_samples(t, lam, t.full_set(), horizon, trials, seed, workers)
    tau = _uncensored(samples)
    mean, m_lo, m_hi = stats.mean_interval(tau, confidence)
    grid = [] if s_grid is None else list(s_grid)
    grid += [] if s_factors is None else [f * mean for f in s_factors]
    rows = []
    for s in grid:
        k = int((tau <= s).sum())
        p_lo, p_hi = stats.wilson_interval(k, tau.size, confidence)
        b = s / mean
        b_lo, b_hi = s / m_hi, (s / m_lo if m_lo > 0 else math.inf)
        rows.append({"s": s, "p": k / tau.size, "p_low": p_lo, "p_high": p_hi,
                     "bound": b, "bound_low": b_lo, "bound_high": b_hi,
                     "violation": p_lo > b_hi})
    return {"mean": mean, "mean_ci": (m_lo, m_hi), "rows": rows,
            "violations": sum(r["violation"] for r in rows), "samples": samples}


def extinction_mean(samples: Sequence[ExtinctionSample], confidence: float = 0.99,
                    seeds=(0, 0, 0)) -> EstimateReport:
    tau = _uncensored(samples)
    m, lo, hi = stats.mean_interval(tau, confidence)
    return EstimateReport(m, lo, hi, int(tau.size), tuple(seeds), confidence,
                          {"std": float(tau.std(ddof=1)) if tau.size > 1 else 0.0,
                           "censored": sum(s.censored for s in samples)})
