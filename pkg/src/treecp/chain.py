"""The integer comparison chain, its Poisson variant, and their exact analysis.

State ``0`` of a kernel matrix stands for the whole absorbing half-line
``{k <= 0}``; states ``1..h4`` are themselves.  Merging is exact for every
question asked here because the half-line is absorbing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
from scipy import stats as _st

from . import _rng
from .errors import ConstructionError, DomainError, SizeError
from .parallel import map_trials
from .params import iroot

ROW_TOL = 1e-12
DUMP_MASS = 1 - 1e-15


def h_scale(n: int, k: int, d: int = 2) -> int:
    """``d ** floor(n ** (1/k))`` with an exact integer root."""
    if n < 1 or k < 1:
        raise DomainError("h_scale needs n >= 1 and k >= 1")
    r = iroot(n, k)
    if r > 4096:
        raise SizeError("h_scale exponent too large")
    return d**r


def lambda_bar(n: int) -> float:
    """Poisson mean ``exp(-2 n**(2/7))`` of the dominating variant."""
    return math.exp(-2 * n ** (2 / 7))


@dataclass(frozen=True, eq=False)
class ChainKernel:
    """Transition matrix over ``{<=0} , 1, ..., h4``.

    ``up`` is the interior upward probability and ``jump`` the law of the
    downward jump (a scipy frozen distribution), ``None`` for hand-built
    kernels.
    """

    n: int
    d: int
    m1: int
    h4: int
    variant: str
    matrix: np.ndarray
    up: float = 0.0
    cbar: float = 0.0
    sigma: float = 0.0
    theta: float = 0.0
    jump: object = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def row(self, k: int) -> np.ndarray:
        return self.matrix[max(k, 0)]

    def tail_at_least(self, k: int, c: int) -> float:
        """``P(next >= c | current = k)``."""
        if c <= 0:
            return 1.0
        return float(self.row(k)[c:].sum())

    @classmethod
    def from_matrix(cls, matrix, variant: str = "custom") -> "ChainKernel":
        """Kernel on ``{<=0}, 1..h4`` from an explicit stochastic matrix."""
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ConstructionError("kernel matrix must be square with >= 2 states")
        _check_rows(m)
        if m[0, 0] != 1.0:
            raise ConstructionError("state <= 0 must be absorbing")
        m.flags.writeable = False
        return cls(0, 0, 0, m.shape[0] - 1, variant, m)


def _check_rows(m: np.ndarray) -> None:
    if (m < 0).any():
        raise ConstructionError("negative transition probability")
    for k, row in enumerate(m):
        s = math.fsum(row)
        if abs(s - 1) > ROW_TOL:
            raise ConstructionError(f"row {k} sums to {s!r}, not 1")


def build_kernel(n: int, d: int, cbar: float, sigma: float, theta: float,
                 variant: str = "paper") -> ChainKernel:
    """Kernel of the comparison chain (``variant="paper"``: Binomial jumps,
    upward mass ``p(0) * cbar * sigma / 2 * theta**(2 m1)``) or of its
    Poisson variant (``"dominating"``: Poisson jumps, upward mass
    ``theta**(4 m1)``)."""
    if n < 1 or d < 2:
        raise DomainError("need n >= 1 and d >= 2")
    if not (0 < theta < 1 and 0 < sigma < 1 and cbar > 0):
        raise ConstructionError("need theta, sigma in (0, 1) and cbar > 0")
    m1 = iroot(n, 4)
    h4 = h_scale(n, 4, d)
    if h4 > 1 << 14:
        raise SizeError(f"h4 = {h4} too large for a dense kernel")
    if variant == "paper":
        jump = _st.binom(h4, math.exp(-n ** (1 / 3)))
        p0 = math.exp(jump.logpmf(0))
        up = p0 * cbar * sigma / 2 * theta ** (2 * m1)
        stay = p0 * (1 - cbar * sigma / 2 * theta ** (2 * m1))
        if up > p0:
            raise ConstructionError("cbar * sigma / 2 * theta**(2 m1) must not exceed 1")
    elif variant == "dominating":
        jump = _st.poisson(lambda_bar(n))
        p0 = math.exp(jump.logpmf(0))
        up = theta ** (4 * m1)
        stay = p0 - up
        if stay < 0:
            raise ConstructionError(
                f"Poisson variant needs pbar(0) >= theta**(4 m1): {p0!r} < {up!r}"
            )
    else:
        raise DomainError(f"unknown variant {variant!r}")

    m = np.zeros((h4 + 1, h4 + 1))
    m[0, 0] = 1.0
    pmf = np.exp(jump.logpmf(np.arange(h4 + 1)))
    for k in range(1, h4 + 1):
        if k < h4:
            m[k, k + 1] = up
            m[k, k] = stay
        else:
            m[k, k] = pmf[0]
        m[k, 1:k] = pmf[1:k][::-1]          # jump by a lands at k - a
        m[k, 0] = jump.sf(k - 1)            # jumps of size >= k
    _check_rows(m)
    m.flags.writeable = False
    return ChainKernel(n, d, m1, h4, variant, m, up, cbar, sigma, theta, jump)


# -- exact analysis -----------------------------------------------------------

def _check_barriers(kernel: ChainKernel, a: int, lower: int, upper: int) -> None:
    if not 0 <= lower < a <= upper <= kernel.h4:
        raise DomainError(f"need 0 <= L < a <= U <= h4 = {kernel.h4}")


def hitting_probability(kernel: ChainKernel, a: int, lower: int = 0,
                        upper: Optional[int] = None) -> float:
    """``P[reach {<= lower} before upper | Z_0 = a]``; overshoot counts as a hit."""
    upper = kernel.h4 if upper is None else upper
    _check_barriers(kernel, a, lower, upper)
    return float(hitting_vector(kernel, lower, upper)[a - lower - 1]) if a < upper else 0.0


def hitting_vector(kernel: ChainKernel, lower: int = 0, upper: Optional[int] = None) -> np.ndarray:
    """Hitting probabilities for every start in ``lower+1 .. upper-1``."""
    upper = kernel.h4 if upper is None else upper
    if not 0 <= lower < upper <= kernel.h4:
        raise DomainError("need 0 <= L < U <= h4")
    inner = np.arange(lower + 1, upper)
    if inner.size == 0:
        return np.zeros(0)
    m = kernel.matrix
    q = m[np.ix_(inner, inner)]
    b = m[inner, : lower + 1].sum(axis=1)
    try:
        return np.linalg.solve(np.eye(inner.size) - q, b)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - proper kernels are nonsingular
        raise RuntimeError("singular first-step system") from exc


def excursion_tail_mass(kernel: ChainKernel) -> dict:
    """Mass of a single downward jump of size ``>= h4/8`` and, for the
    Poisson variant, the closed-form bound ``lambda_bar ** ceil(h4/8)``."""
    if kernel.jump is None:
        raise DomainError("tail mass needs a built kernel")
    depth = math.ceil(kernel.h4 / 8)
    out = {"depth": depth, "mass": float(kernel.jump.sf(depth - 1))}
    if kernel.variant == "dominating":
        out["bound"] = kernel.jump.mean() ** depth
    return out


def _sub_power_hit(kernel: ChainKernel, a: int, bad_max: int, lo: int, hi: int) -> float:
    """``P[min_{lo <= i <= hi} Z_i <= bad_max | Z_0 = a]``."""
    m = kernel.matrix
    mu = np.zeros(kernel.n_states)
    mu[max(a, 0)] = 1.0
    if lo > 0:
        mu = mu @ np.linalg.matrix_power(m, lo)
    good = np.arange(bad_max + 1, kernel.n_states)
    if good.size == 0:
        return 1.0
    q = m[np.ix_(good, good)]
    stay = mu[good] @ np.linalg.matrix_power(q, hi - lo).sum(axis=1)
    return float(min(1.0, max(0.0, 1 - stay)))


def verify_rwest(kernel: ChainKernel, a: Optional[int] = None, horizon: Optional[int] = None,
                 lower_horizon: int = 0) -> dict:
    """Exact probability of dipping to ``<= (3/4) h4`` during steps
    ``[lower_horizon, horizon]`` from ``a``, next to the bound forms
    ``exp(-a)`` and ``exp(-h4)``.  Nothing is asserted."""
    a = kernel.h4 if a is None else a
    if a > kernel.h4:
        raise DomainError("start above h4")
    if horizon is None:
        horizon = int(math.exp(h_scale(kernel.n, 5, kernel.d)))
    if not 0 <= lower_horizon <= horizon:
        raise DomainError("need 0 <= lower_horizon <= horizon")
    bad = math.floor(0.75 * kernel.h4)
    p = 1.0 if a <= bad and lower_horizon == 0 else _sub_power_hit(kernel, a, bad, lower_horizon, horizon)
    return {"a": a, "threshold": bad, "horizon": horizon, "lower_horizon": lower_horizon,
            "probability": p, "bound_a": math.exp(-max(a, 0)), "bound_h4": math.exp(-kernel.h4)}


def supersolution_values(kernel: ChainKernel, r: Optional[float] = None) -> dict:
    """Generator of the Poisson variant applied to ``exp(-r x)`` at interior
    states, in closed form:
    ``[theta**(4 m1) (e**-r - 1) + expm1(lbar (e**r - 1))] exp(-r x)``."""
    if kernel.variant != "dominating":
        raise DomainError("supersolution check runs on the Poisson variant")
    r = kernel.n ** (2 / 7) if r is None else r
    lbar = float(kernel.jump.mean())
    up = kernel.up
    ratio = up * math.expm1(-r) + math.expm1(lbar * math.expm1(r))
    states = np.arange(1, kernel.h4)
    values = ratio * np.exp(-r * states)
    bracket = up * math.expm1(-r) + math.expm1(math.exp(-r))
    return {"n": kernel.n, "r": r, "states": states.tolist(), "values": values.tolist(),
            "ratio": ratio, "max": float(values.max()) if values.size else 0.0,
            "holds": bool((values <= 0).all()), "bracket": bracket, "leading": -up}


def generator_series(kernel: ChainKernel, f, x: int, terms: int = 200) -> float:
    """Generator of the Poisson variant at ``x`` by direct summation over jumps."""
    lbar = float(kernel.jump.mean())
    s = [kernel.up * (f(x + 1) - f(x))]
    log_l = math.log(lbar)
    for a in range(1, terms):
        s.append(math.exp(-lbar + a * log_l - math.lgamma(a + 1)) * (f(x - a) - f(x)))
    return math.fsum(s)


def supersolution_check(kernel: ChainKernel, r: Optional[float] = None) -> dict:
    return supersolution_values(kernel, r)


def smallest_supersolution_n(d: int, theta: float, ns=range(1, 201), cbar: float = 0.5,
                             sigma: float = 0.5) -> dict:
    """Scan ``ns`` for the first height at which the supersolution inequality
    holds at every interior state; heights whose Poisson variant cannot be
    built are listed separately."""
    rejected = []
    for n in ns:
        try:
            k = build_kernel(n, d, cbar, sigma, theta, "dominating")
        except ConstructionError:
            rejected.append(n)
            continue
        rep = supersolution_values(k)
        if rep["holds"]:
            return {"n": n, "report": rep, "rejected": rejected}
    return {"n": None, "report": None, "rejected": rejected}


def dominance_report(lower: ChainKernel, upper: ChainKernel) -> dict:
    """Row-wise check that ``upper`` puts at least as much mass as ``lower``
    on ``{>= c}`` for every state and threshold."""
    if lower.n_states != upper.n_states:
        raise DomainError("kernels live on different state spaces")
    worst = math.inf
    failures = []
    for k in range(lower.n_states):
        cl = np.cumsum(lower.matrix[k][::-1])[::-1]
        cu = np.cumsum(upper.matrix[k][::-1])[::-1]
        gap = cu - cl
        g = float(gap.min())
        worst = min(worst, g)
        if g < -ROW_TOL:
            failures.append(k)
    return {"holds": not failures, "failing_states": failures, "min_gap": worst}


def kernel_to_dict(kernel: ChainKernel) -> dict:
    rows = []
    for k in range(kernel.n_states):
        row = kernel.matrix[k]
        order = np.argsort(-row, kind="stable")
        kept, mass = [], 0.0
        for j in order:
            if row[j] <= 0 or mass >= DUMP_MASS:
                break
            kept.append((int(j), float(row[j])))
            mass += row[j]
        rows.append({"state": k, "transitions": sorted(kept)})
    return {"n": kernel.n, "d": kernel.d, "m1": kernel.m1, "h4": kernel.h4,
            "variant": kernel.variant, "cbar": kernel.cbar, "sigma": kernel.sigma,
            "theta": kernel.theta, "absorbing_state": 0, "rows": rows}


def dump_kernel(kernel: ChainKernel, path) -> None:
    with open(path, "w") as fh:
        json.dump(kernel_to_dict(kernel), fh, indent=1)


# -- simulation ---------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _step(cum, k, key, counter):
    u = _rng.uniform(key, counter)
    row = cum[k]
    j = np.searchsorted(row, u, side="right")
    return min(j, row.shape[0] - 1)


@numba.njit(cache=True, nogil=True)
def _path(cum, a, steps, seed):
    key = _rng.stream_key(seed, 0)
    out = np.empty(steps + 1, dtype=np.int64)
    out[0] = a
    k = a
    for i in range(steps):
        k = _step(cum, k, key, i)
        out[i + 1] = k
    return out


@numba.njit(cache=True, nogil=True)
def _hit_batch(cum, a, lower, upper, seeds):
    out = np.empty(len(seeds), dtype=np.bool_)
    for i in range(len(seeds)):
        key = _rng.stream_key(seeds[i], 0)
        k = a
        c = 0
        while lower < k < upper:
            k = _step(cum, k, key, c)
            c += 1
        out[i] = k <= lower
    return out


def _cum(kernel: ChainKernel) -> np.ndarray:
    cum = np.cumsum(kernel.matrix, axis=1)
    cum[:, -1] = 1.0
    return cum


def simulate_chain(kernel: ChainKernel, a: int, steps: int, seed: int) -> np.ndarray:
    """Path ``Z_0 = a, ..., Z_steps``; the merged state ``0`` stands for ``<= 0``."""
    if steps < 0:
        raise DomainError("steps must be >= 0")
    if a > kernel.h4:
        raise DomainError("start above h4")
    return _path(_cum(kernel), max(a, 0), steps, np.uint64(int(seed) % 2**64))


def hitting_frequency(kernel: ChainKernel, a: int, lower: int = 0, upper: Optional[int] = None,
                      trials: int = 10**6, seed: int = 0, workers: Optional[int] = None,
                      chunk: int = 1 << 16) -> np.ndarray:
    """Per-path indicators of reaching ``{<= lower}`` before ``upper``."""
    upper = kernel.h4 if upper is None else upper
    _check_barriers(kernel, a, lower, upper)
    cum = _cum(kernel)

    def run(seeds):
        return _hit_batch(cum, a, lower, upper, seeds).tolist()

    return np.array(map_trials(run, seed, trials, workers, chunk), dtype=bool)


def deep_drop_frequency(kernel: ChainKernel, trials: int, seed: int = 0) -> float:
    """Fraction of single steps from ``h4`` that drop by at least ``h4/8``."""
    depth = math.ceil(kernel.h4 / 8)
    cum = _cum(kernel)
    seeds = _rng.trial_seeds(seed, trials)
    nxt = _first_steps(cum, kernel.h4, seeds)
    return float(np.mean(kernel.h4 - nxt >= depth))


@numba.njit(cache=True, nogil=True)
def _first_steps(cum, k, seeds):
    out = np.empty(len(seeds), dtype=np.int64)
    for i in range(len(seeds)):
        out[i] = _step(cum, k, _rng.stream_key(seeds[i], 0), 0)
    return out
