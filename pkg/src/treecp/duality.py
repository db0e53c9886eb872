"""Dual process and the duality relation on a shared Harris system."""
from __future__ import annotations

import numpy as np

from .errors import DomainError
from .harris import HarrisSystem, backward_sweep, evolve


def dual_evolve(h: HarrisSystem, anchor, t: float, s: float, inside=None) -> np.ndarray:
    """Dual configuration ``{y : (y, t - s) <-> anchor x {t}}``.

    Arrows are read in reverse (target to source) during a backward sweep
    over the events of ``h`` in ``[t - s, t]``; no reversed system is built.
    """
    if s > t:
        raise DomainError("backward time s exceeds anchor time t")
    return backward_sweep(h, anchor, t, s, inside)


def duality_sides(h: HarrisSystem, a, b, t: float) -> tuple[bool, bool]:
    """``({xi^A_t meets B}, {dual^(B,t)_t meets A})`` on ``h``."""
    topo = h.topology
    a = topo.as_vertex_set(a)
    b = topo.as_vertex_set(b)
    forward = bool(np.any(evolve(h, a, t) & b))
    backward = bool(np.any(dual_evolve(h, b, t, t) & a))
    return forward, backward


def check_duality(h: HarrisSystem, a, b, t: float) -> bool:
    """True iff both sides of the duality relation agree on ``h``."""
    forward, backward = duality_sides(h, a, b, t)
    return forward == backward
