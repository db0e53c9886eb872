"""Confidence intervals, Kolmogorov-Smirnov distances and estimate reports."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats as _st

from .errors import DataError, DomainError


@dataclass
class EstimateReport:
    """Point estimate with a confidence interval.

    ``seeds`` is ``(master_seed, first_trial, n_trials)``; ``extra`` carries
    estimator-specific fields (bounds, flags, per-n tables).
    """

    estimate: float
    ci_low: float
    ci_high: float
    n_samples: int
    seeds: tuple = (0, 0, 0)
    confidence: float = 0.99
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_samples <= 0:
            raise DataError("an estimate needs at least one sample")
        if not self.ci_low <= self.estimate <= self.ci_high:
            if not (math.isnan(self.estimate)):
                raise DataError("confidence interval must contain the estimate")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d


def _z(confidence: float) -> float:
    if not 0 < confidence < 1:
        raise DomainError("confidence must lie in (0, 1)")
    return float(_st.norm.ppf(0.5 + confidence / 2))


def wilson_interval(successes: int, n: int, confidence: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise DomainError("need at least one trial")
    z = _z(confidence)
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # Exact endpoints at the boundary; guards against rounding below 0 / above 1.
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return min(lo, p), max(hi, p)


def proportion_report(successes: int, n: int, confidence: float = 0.99, seeds=(0, 0, 0), **extra) -> EstimateReport:
    lo, hi = wilson_interval(successes, n, confidence)
    return EstimateReport(successes / n, lo, hi, n, tuple(seeds), confidence, dict(extra))


def mean_interval(x, confidence: float = 0.99) -> tuple[float, float, float]:
    """Sample mean with a normal-approximation interval."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise DataError("empty sample")
    m = float(x.mean())
    if x.size == 1:
        return m, m, m
    half = _z(confidence) * float(x.std(ddof=1)) / math.sqrt(x.size)
    return m, m - half, m + half


def quantile_interval(x, q: float, confidence: float = 0.99) -> tuple[float, float, float]:
    """Sample ``q``-quantile with a distribution-free order-statistic interval."""
    if not 0 < q < 1:
        raise DomainError("quantile level must lie in (0, 1)")
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    if n == 0:
        raise DataError("empty sample")
    est = float(np.quantile(x, q))
    alpha = 1 - confidence
    lo_rank = int(_st.binom.ppf(alpha / 2, n, q))
    hi_rank = int(_st.binom.ppf(1 - alpha / 2, n, q)) + 1
    lo = float(x[max(lo_rank - 1, 0)])
    hi = float(x[min(hi_rank - 1, n - 1)])
    return est, min(lo, est), max(hi, est)


def ks_distance_exp1(x) -> float:
    """Sup distance between the empirical law of ``x`` and Exp(1)."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    if n == 0:
        raise DataError("empty sample")
    cdf = -np.expm1(-np.maximum(x, 0.0))
    d_plus = np.max(np.arange(1, n + 1) / n - cdf)
    d_minus = np.max(cdf - np.arange(n) / n)
    return float(max(d_plus, d_minus))


def ks_two_sample(x, y) -> tuple[float, float]:
    """Two-sample KS statistic and p-value."""
    r = _st.ks_2samp(np.asarray(x), np.asarray(y))
    return float(r.statistic), float(r.pvalue)


def empirical_cdf(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(x, dtype=float))
    return x, np.arange(1, x.size + 1) / max(x.size, 1)


def linear_fit(x, y, w: Optional[np.ndarray] = None):
    """Weighted least squares ``y ~ a + b x``; returns ``(a, b, se_a, se_b)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    X = np.stack([np.ones_like(x), x], axis=1)
    W = np.diag(w)
    cov = np.linalg.inv(X.T @ W @ X)
    beta = cov @ X.T @ W @ y
    resid = y - X @ beta
    dof = max(len(x) - 2, 1)
    s2 = float(resid @ W @ resid) / dof
    se = np.sqrt(np.diag(cov) * s2)
    return float(beta[0]), float(beta[1]), float(se[0]), float(se[1])
