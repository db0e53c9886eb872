"""Event-driven forward simulation of the contact process.

Uses uniformization by thinning: with ``k`` infected vertices and maximum
degree ``D``, proposals arrive at total rate ``k * (1 + lam * D)``; each
picks an infected vertex uniformly, then either recovers it (probability
``1 / (1 + lam * D)``) or aims at one of ``D`` neighbour slots, infecting
the neighbour if the slot exists and the neighbour is healthy.  Every
transition therefore fires at exactly its generator rate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from . import _rng
from .errors import DomainError
from .graph import GraphTopology


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Piecewise-constant, right-continuous path of infected sets.

    ``times[i]``, ``vertices[i]``, ``states[i]`` record that the vertex
    switched to ``states[i]`` (1 infected, 0 healthy) at ``times[i]``.
    """

    topology: GraphTopology
    initial: np.ndarray
    times: np.ndarray
    vertices: np.ndarray
    states: np.ndarray
    horizon: float

    @property
    def n_events(self) -> int:
        return len(self.times)

    def at(self, t: float) -> np.ndarray:
        if not 0 <= t <= self.horizon:
            raise DomainError(f"t must lie in [0, {self.horizon}]")
        k = int(np.searchsorted(self.times, t, side="right"))
        state = self.initial.copy()
        rev_v = self.vertices[:k][::-1]
        uniq, first = np.unique(rev_v, return_index=True)
        state[uniq] = self.states[:k][::-1][first].astype(bool)
        return state

    def sizes(self) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoints ``[0, t_1, ...]`` and the infected count on each piece."""
        step = np.where(self.states == 1, 1, -1)
        counts = int(self.initial.sum()) + np.concatenate([[0], np.cumsum(step)])
        return np.concatenate([[0.0], self.times]), counts

    def extinction_time(self) -> float:
        """First time the path is empty, or ``inf`` if it survives the horizon."""
        t, counts = self.sizes()
        hit = np.flatnonzero(counts == 0)
        return float(t[hit[0]]) if hit.size else float("inf")

    def restrict(self, c) -> "Trajectory":
        """Projection onto the vertex set ``c``."""
        c = self.topology.as_vertex_set(c)
        keep = c[self.vertices]
        return Trajectory(
            self.topology, self.initial & c, self.times[keep],
            self.vertices[keep], self.states[keep], self.horizon,
        )

    def occupancy(self, target) -> list[tuple[float, float]]:
        """Maximal intervals ``[a, b)`` on which the path meets ``target``;
        the last interval is closed at the horizon."""
        sub = self.restrict(target)
        t, counts = sub.sizes()
        t = np.append(t, self.horizon)
        out = []
        start = None
        for i, c in enumerate(counts):
            if c > 0 and start is None:
                start = t[i]
            elif c == 0 and start is not None:
                if t[i] > start:
                    out.append((float(start), float(t[i])))
                start = None
        if start is not None:
            out.append((float(start), float(self.horizon)))
        return out

    def configurations(self):
        """Yield ``(time, configuration)`` at 0 and after each event; the
        yielded array is reused, copy it to keep it."""
        state = self.initial.copy()
        yield 0.0, state
        for t, v, s in zip(self.times, self.vertices, self.states):
            state[v] = bool(s)
            yield float(t), state


@numba.njit(cache=True, nogil=True)
def _simulate(nbr, deg, lam, init, horizon, seed, record):
    n = deg.shape[0]
    width = nbr.shape[1]
    key = _rng.stream_key(seed, 0)
    counter = 0
    infected = init.copy()
    lst = np.empty(n, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    k = 0
    for v in range(n):
        if infected[v]:
            lst[k] = v
            pos[v] = k
            k += 1
    cap = 64 if record else 1
    ev_t = np.empty(cap)
    ev_v = np.empty(cap, dtype=np.int64)
    ev_s = np.empty(cap, dtype=np.int8)
    m = 0
    spread = 1.0 + lam * width
    t = 0.0
    while k > 0:
        t += -np.log(_rng.uniform(key, counter)) / (k * spread)
        counter += 1
        if t > horizon:
            break
        x = lst[min(int(_rng.uniform(key, counter) * k), k - 1)]
        counter += 1
        w = _rng.uniform(key, counter) * spread
        counter += 1
        if w < 1.0:
            j = pos[x]
            last = lst[k - 1]
            lst[j] = last
            pos[last] = j
            pos[x] = -1
            k -= 1
            infected[x] = False
            new_v = x
            new_s = 0
        else:
            slot = min(int((w - 1.0) / lam), width - 1)
            if slot >= deg[x]:
                continue
            y = nbr[x, slot]
            if infected[y]:
                continue
            infected[y] = True
            lst[k] = y
            pos[y] = k
            k += 1
            new_v = y
            new_s = 1
        if record:
            if m == cap:
                cap *= 2
                ev_t2 = np.empty(cap)
                ev_v2 = np.empty(cap, dtype=np.int64)
                ev_s2 = np.empty(cap, dtype=np.int8)
                ev_t2[:m] = ev_t[:m]
                ev_v2[:m] = ev_v[:m]
                ev_s2[:m] = ev_s[:m]
                ev_t, ev_v, ev_s = ev_t2, ev_v2, ev_s2
            ev_t[m] = t
            ev_v[m] = new_v
            ev_s[m] = new_s
            m += 1
    tau = t if k == 0 else horizon
    return tau, k > 0, infected, ev_t[:m], ev_v[:m], ev_s[:m]


@numba.njit(cache=True, nogil=True)
def _extinction_batch(nbr, deg, lam, init, horizon, seeds):
    taus = np.empty(len(seeds))
    censored = np.empty(len(seeds), dtype=np.bool_)
    for i in range(len(seeds)):
        tau, cen, _, _, _, _ = _simulate(nbr, deg, lam, init, horizon, seeds[i], False)
        taus[i] = tau
        censored[i] = cen
    return taus, censored


@numba.njit(cache=True, nogil=True)
def _size_batch(nbr, deg, lam, init, t, seeds):
    out = np.empty(len(seeds), dtype=np.int64)
    for i in range(len(seeds)):
        _, _, final, _, _, _ = _simulate(nbr, deg, lam, init, t, seeds[i], False)
        out[i] = final.sum()
    return out


def _validate(lam, horizon):
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if not horizon > 0:
        raise DomainError("horizon must be positive")


def simulate_forward(t: GraphTopology, lam: float, a, horizon: float, seed: int) -> Trajectory:
    """Sample a contact-process trajectory on ``[0, horizon]`` from ``a``."""
    _validate(lam, horizon)
    init = t.as_vertex_set(a).copy()
    _, _, _, ev_t, ev_v, ev_s = _simulate(
        t.nbr, t.deg, float(lam), init, float(horizon), np.uint64(int(seed) % 2**64), True
    )
    return Trajectory(t, init, ev_t, ev_v, ev_s, float(horizon))


def extinction_times(t: GraphTopology, lam: float, a, horizon: float, seeds):
    """Extinction times for a batch of seeds; returns ``(tau, censored)``
    with ``tau = horizon`` where censored."""
    _validate(lam, horizon)
    init = t.as_vertex_set(a)
    seeds = np.asarray(seeds, dtype=np.uint64)
    return _extinction_batch(t.nbr, t.deg, float(lam), init, float(horizon), seeds)


def sizes_at(t: GraphTopology, lam: float, a, time: float, seeds) -> np.ndarray:
    """``|xi_time|`` for a batch of seeds."""
    _validate(lam, time)
    init = t.as_vertex_set(a)
    seeds = np.asarray(seeds, dtype=np.uint64)
    return _size_batch(t.nbr, t.deg, float(lam), init, float(time), seeds)
