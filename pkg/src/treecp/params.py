"""Constants of the supercritical argument and the height decompositions."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import ConstructionError, DomainError


def iroot(n: int, k: int) -> int:
    """Exact ``floor(n ** (1/k))`` for integers ``n >= 0, k >= 1``."""
    if n < 0 or k < 1:
        raise DomainError("iroot needs n >= 0 and k >= 1")
    r = int(round(n ** (1.0 / k))) if n else 0
    while r**k > n:
        r -= 1
    while (r + 1) ** k <= n:
        r += 1
    return r


@dataclass(frozen=True)
class ParameterSet:
    """``theta, v0, v1`` must satisfy ``1 < 1/theta < v**(1/6) < v**(1/2) < dbar``
    for both ``v``; ``dbar = 2d/3``.  ``sigma, K, S`` and ``cbar, ell`` are the
    existential constants of the level-one estimates; no numeric value of
    them is known, so they are always user-supplied or placeholders.
    """

    d: int
    theta: float
    v0: float
    v1: float
    sigma: float = 0.5
    K: float = 1.0
    S: float = 1.0
    cbar: float = 0.5
    ell: float = 1.0

    def __post_init__(self):
        if self.d < 2:
            raise ConstructionError("degree d must be >= 2")
        if not 0 < self.theta < 1:
            raise ConstructionError("theta must lie in (0, 1)")
        if not self.v0 < self.v1:
            raise ConstructionError("need v0 < v1")
        for name, v in (("v0", self.v0), ("v1", self.v1)):
            chain = [1.0, 1 / self.theta, v ** (1 / 6), v ** 0.5, self.dbar]
            if not all(a < b for a, b in zip(chain, chain[1:])):
                raise ConstructionError(
                    f"1 < 1/theta < {name}^(1/6) < {name}^(1/2) < dbar fails: {chain}"
                )
        if not 0 < self.sigma < 1:
            raise ConstructionError("sigma must lie in (0, 1)")
        for name in ("K", "S", "cbar", "ell"):
            if not getattr(self, name) > 0:
                raise ConstructionError(f"{name} must be positive")

    @property
    def dbar(self) -> float:
        return 2 * self.d / 3

    @classmethod
    def for_degree(cls, d: int, **overrides) -> "ParameterSet":
        """A parameter set valid for degree ``d``.

        ``theta`` sits halfway between ``dbar**(-1/3)`` and 1 and ``v0, v1``
        split ``(theta**-6, dbar**2)`` into thirds.  The level-one constants
        default to placeholders.
        """
        dbar = 2 * d / 3
        theta = overrides.pop("theta", (dbar ** (-1 / 3) + 1) / 2)
        lo, hi = theta**-6, dbar**2
        v0 = overrides.pop("v0", lo + (hi - lo) / 3)
        v1 = overrides.pop("v1", lo + 2 * (hi - lo) / 3)
        return cls(d=d, theta=theta, v0=v0, v1=v1, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Decomposition:
    """``n = n1 + n2`` with ``n2 ~ u ** n1`` and ``n = m1 + m2`` with
    ``m1 = floor(n ** (1/4))``.  ``residual = n2 - round(u ** n1)`` is zero
    when the first split is exact."""

    n: int
    n1: int
    n2: int
    u: float
    m1: int
    m2: int
    residual: int


def decompose(n: int, params: ParameterSet) -> Decomposition:
    """Pick ``n1`` and ``u in [v0, v1]`` minimising ``|n - n1 - round(u**n1)|``,
    smaller ``n1`` on ties.  ``n2`` is ``n - n1`` so the split always adds up."""
    if n < 2:
        raise DomainError("decomposition needs n >= 2")
    best = None
    for n1 in range(1, n):
        target = n - n1
        u = min(max(target ** (1.0 / n1), params.v0), params.v1)
        err = target - round(u**n1)
        if best is None or abs(err) < abs(best[2]):
            best = (n1, u, err)
        if params.v0**n1 > n:
            break
    n1, u, err = best
    m1 = iroot(n, 4)
    return Decomposition(n, n1, n - n1, u, m1, n - m1, int(err))


def g_threshold(n: int) -> float:
    """Return-probability threshold ``1 - exp(-sqrt(n)/2)`` of the good set."""
    return -math.expm1(-0.5 * math.sqrt(n))
