"""Harris systems (graphical construction) and infection-path evaluation.

A :class:`HarrisSystem` stores every recovery mark and transmission arrow
on ``[0, T]`` as one event list sorted by ``(time, stream)``.  Recovery
streams have ids ``0 .. N-1`` (one per vertex) and transmission streams
``N + k`` for arc ``k`` of the topology, so the sort order is
``(time, kind, id)`` with recoveries first on ties.

Path semantics on the event list: an infection path started at
``(x, s)`` may not sit on a vertex when that vertex has a recovery mark in
``[s, t]`` and may jump along an arrow at time ``r`` only for ``s < r <= t``.
Events are applied one at a time in list order, so a chain of arrows
sharing one time stamp (a null event for sampled systems) is traversed in
list order.  Forward and backward sweeps use the same rule, which keeps
the duality identity exact for every event list.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numba
import numpy as np

from . import _rng
from .errors import DomainError
from .graph import GraphTopology, from_edges

RECOVERY = 0
TRANSMISSION = 1
_MARK_OFFSET = 1 << 40


@dataclass(frozen=True, eq=False)
class HarrisSystem:
    topology: GraphTopology
    lam: float
    horizon: float
    seed: int
    times: np.ndarray
    kind: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    stream: np.ndarray
    mark: np.ndarray = field(repr=False)

    @property
    def n_events(self) -> int:
        return len(self.times)

    @property
    def n_streams(self) -> int:
        return self.topology.n_vertices + len(self.topology.arcs)

    def recovery_times(self, v: int) -> np.ndarray:
        return self.times[(self.kind == RECOVERY) & (self.src == v)]

    def transmission_times(self, x: int, y: int) -> np.ndarray:
        sel = (self.kind == TRANSMISSION) & (self.src == x) & (self.dst == y)
        return self.times[sel]

    def stream_ids(self, vertices: np.ndarray) -> np.ndarray:
        """Ids of the streams living inside the vertex set ``vertices``:
        recoveries of its members and arcs with both ends in it."""
        n = self.topology.n_vertices
        arcs = self.topology.arcs
        inner = vertices[arcs[:, 0]] & vertices[arcs[:, 1]]
        return np.concatenate([np.flatnonzero(vertices), n + np.flatnonzero(inner)])


# -- sampling ---------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _sample_streams(n_vertices, arcs, lam, horizon, seed):
    n_arcs = arcs.shape[0]
    n_streams = n_vertices + n_arcs
    counts = np.zeros(n_streams, dtype=np.int64)
    for s in range(n_streams):
        rate = 1.0 if s < n_vertices else lam
        key = _rng.stream_key(seed, s)
        t = 0.0
        c = 0
        while True:
            t += -np.log(_rng.uniform(key, c)) / rate
            if t > horizon:
                break
            c += 1
        counts[s] = c
    total = counts.sum()
    times = np.empty(total)
    kind = np.empty(total, dtype=np.int8)
    src = np.empty(total, dtype=np.int64)
    dst = np.empty(total, dtype=np.int64)
    stream = np.empty(total, dtype=np.int64)
    mark = np.zeros(total)
    pos = 0
    for s in range(n_streams):
        rate = 1.0 if s < n_vertices else lam
        key = _rng.stream_key(seed, s)
        mkey = _rng.stream_key(seed, s + _MARK_OFFSET)
        t = 0.0
        for c in range(counts[s]):
            t += -np.log(_rng.uniform(key, c)) / rate
            times[pos] = t
            stream[pos] = s
            if s < n_vertices:
                kind[pos] = RECOVERY
                src[pos] = s
                dst[pos] = -1
            else:
                kind[pos] = TRANSMISSION
                src[pos] = arcs[s - n_vertices, 0]
                dst[pos] = arcs[s - n_vertices, 1]
                mark[pos] = _rng.uniform(mkey, c)
            pos += 1
    order = np.argsort(times, kind="mergesort")
    return times[order], kind[order], src[order], dst[order], stream[order], mark[order]


def sample_harris(t: GraphTopology, lam: float, horizon: float, seed: int) -> HarrisSystem:
    """Sample independent Poisson streams on ``[0, horizon]``: rate 1 per
    vertex, rate ``lam`` per directed edge.  Bit-identical for identical
    ``(seed, topology, lam, horizon)``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    seed = int(seed) % 2**64
    arrays = _sample_streams(t.n_vertices, t.arcs, float(lam), float(horizon), np.uint64(seed))
    for a in arrays:
        a.setflags(write=False)
    return HarrisSystem(t, float(lam), float(horizon), seed, *arrays)


def from_events(
    t: GraphTopology,
    lam: float,
    horizon: float,
    recoveries: Optional[Mapping[int, list]] = None,
    transmissions: Optional[Mapping[tuple, list]] = None,
    seed: int = 0,
) -> HarrisSystem:
    """Hand-built Harris system, e.g. ``recoveries={1: [1.5]}``,
    ``transmissions={(0, 1): [1.0]}``."""
    n = t.n_vertices
    arc_index = {(int(x), int(y)): k for k, (x, y) in enumerate(t.arcs)}
    rows = []
    for v, ts in (recoveries or {}).items():
        if not 0 <= v < n:
            raise DomainError(f"vertex {v} out of range")
        rows += [(float(s), v, v, -1) for s in _checked_stream(ts, horizon)]
    for (x, y), ts in (transmissions or {}).items():
        if (x, y) not in arc_index:
            raise DomainError(f"({x}, {y}) is not an edge")
        rows += [(float(s), n + arc_index[(x, y)], x, y) for s in _checked_stream(ts, horizon)]
    rows.sort(key=lambda r: (r[0], r[1]))
    times = np.array([r[0] for r in rows], dtype=np.float64)
    stream = np.array([r[1] for r in rows], dtype=np.int64)
    src = np.array([r[2] for r in rows], dtype=np.int64)
    dst = np.array([r[3] for r in rows], dtype=np.int64)
    kind = (stream >= n).astype(np.int8)
    mark = np.zeros(len(rows))
    return HarrisSystem(t, float(lam), float(horizon), int(seed), times, kind, src, dst, stream, mark)


def _checked_stream(ts, horizon):
    ts = [float(s) for s in ts]
    if any(not 0 <= s <= horizon for s in ts):
        raise DomainError("event time outside [0, horizon]")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise DomainError("stream times must be strictly increasing")
    return ts


def thin(h: HarrisSystem, lam_new: float) -> HarrisSystem:
    """Keep each arrow independently with probability ``lam_new / lam``.

    Uses the per-arrow uniform marks, so ``thin(h, a)`` has a subset of the
    arrows of ``thin(h, b)`` whenever ``a <= b``.
    """
    if not 0 < lam_new <= h.lam:
        raise DomainError("thinning needs 0 < lam_new <= lam")
    p = lam_new / h.lam
    keep = (h.kind == RECOVERY) | (h.mark < p)
    mark = np.where(h.kind == RECOVERY, 0.0, h.mark / p)[keep]
    return HarrisSystem(
        h.topology, float(lam_new), h.horizon, h.seed,
        h.times[keep], h.kind[keep], h.src[keep], h.dst[keep], h.stream[keep], mark,
    )


# -- sweeps -----------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _forward_sweep(times, kind, src, dst, lo, hi, t_start, state, inside):
    for e in range(lo, hi):
        if kind[e] == RECOVERY:
            state[src[e]] = False
        elif times[e] > t_start:
            x = src[e]
            y = dst[e]
            if state[x] and inside[y]:
                state[y] = True


@numba.njit(cache=True, nogil=True)
def _backward_sweep(times, kind, src, dst, lo, hi, t_start, state, inside):
    for e in range(hi - 1, lo - 1, -1):
        if kind[e] == RECOVERY:
            state[src[e]] = False
        elif times[e] > t_start:
            x = src[e]
            y = dst[e]
            if state[y] and inside[x]:
                state[x] = True


@numba.njit(cache=True, nogil=True)
def _forward_record(times, kind, src, dst, lo, hi, t_start, state, inside):
    ev_t = np.empty(hi - lo)
    ev_v = np.empty(hi - lo, dtype=np.int64)
    ev_s = np.empty(hi - lo, dtype=np.int8)
    k = 0
    for e in range(lo, hi):
        if kind[e] == RECOVERY:
            v = src[e]
            if state[v]:
                state[v] = False
                ev_t[k] = times[e]
                ev_v[k] = v
                ev_s[k] = 0
                k += 1
        elif times[e] > t_start:
            x = src[e]
            y = dst[e]
            if state[x] and inside[y] and not state[y]:
                state[y] = True
                ev_t[k] = times[e]
                ev_v[k] = y
                ev_s[k] = 1
                k += 1
    return ev_t[:k], ev_v[:k], ev_s[:k]


@numba.njit(cache=True, nogil=True)
def _singleton_sweep(times, kind, src, dst, n, n_words, checks):
    """Bit ``x`` of ``words[y]`` is set iff ``y`` is in the process started
    from ``{x}``; snapshots are taken at each time in ``checks``."""
    words = np.zeros((n, n_words), dtype=np.uint64)
    for x in range(n):
        words[x, x >> 6] = np.uint64(1) << np.uint64(x & 63)
    out = np.zeros((len(checks), n, n_words), dtype=np.uint64)
    e = 0
    n_ev = len(times)
    for c in range(len(checks)):
        tc = checks[c]
        while e < n_ev and times[e] <= tc:
            if kind[e] == RECOVERY:
                v = src[e]
                for w in range(n_words):
                    words[v, w] = 0
            elif times[e] > 0.0:
                x = src[e]
                y = dst[e]
                for w in range(n_words):
                    words[y, w] |= words[x, w]
            e += 1
        out[c] = words
    return out


def _check_window(h: HarrisSystem, s: float, t: float):
    if not 0 <= s <= h.horizon or not 0 <= t <= h.horizon:
        raise DomainError(f"times must lie in [0, {h.horizon}]")
    if s > t:
        raise DomainError("start time exceeds end time")
    lo = int(np.searchsorted(h.times, s, side="left"))
    hi = int(np.searchsorted(h.times, t, side="right"))
    return lo, hi


def _inside_mask(h: HarrisSystem, inside) -> np.ndarray:
    if inside is None:
        return np.ones(h.topology.n_vertices, dtype=bool)
    return h.topology.as_vertex_set(inside)


def evolve_shifted(h: HarrisSystem, a, s: float, t: float, inside=None) -> np.ndarray:
    """``{y : A x {s} <-> (y, t)}``, optionally confined to ``inside``."""
    lo, hi = _check_window(h, s, t)
    mask = _inside_mask(h, inside)
    state = h.topology.as_vertex_set(a) & mask
    _forward_sweep(h.times, h.kind, h.src, h.dst, lo, hi, float(s), state, mask)
    return state


def evolve(h: HarrisSystem, a, t: float, inside=None) -> np.ndarray:
    """Contact process started from ``a`` at time 0, read at time ``t``."""
    return evolve_shifted(h, a, 0.0, t, inside)


def reachable(h: HarrisSystem, source: tuple, target: tuple, inside=None) -> bool:
    """Whether an infection path joins ``(x, s)`` to ``(y, t)``."""
    (x, s), (y, t) = source, target
    n = h.topology.n_vertices
    if not (0 <= x < n and 0 <= y < n):
        raise DomainError("vertex out of range")
    mask = _inside_mask(h, inside)
    if not (mask[x] and mask[y]):
        raise DomainError("endpoints must lie inside the restriction set")
    return bool(evolve_shifted(h, [x], s, t, mask)[y])


def backward_sweep(h: HarrisSystem, b, t: float, s: float, inside=None) -> np.ndarray:
    """``{y : (y, t - s) <-> B x {t}}`` computed by one reversed sweep."""
    if not 0 <= s <= t:
        raise DomainError("need 0 <= s <= t")
    lo, hi = _check_window(h, t - s, t)
    mask = _inside_mask(h, inside)
    state = h.topology.as_vertex_set(b) & mask
    _backward_sweep(h.times, h.kind, h.src, h.dst, lo, hi, float(t - s), state, mask)
    return state


def harris_trajectory(h: HarrisSystem, a, t: Optional[float] = None, inside=None):
    """Record the path of ``evolve(h, a, ., inside)`` on ``[0, t]``."""
    from .forward import Trajectory

    t = h.horizon if t is None else t
    lo, hi = _check_window(h, 0.0, t)
    mask = _inside_mask(h, inside)
    init = h.topology.as_vertex_set(a) & mask
    state = init.copy()
    ev_t, ev_v, ev_s = _forward_record(h.times, h.kind, h.src, h.dst, lo, hi, 0.0, state, mask)
    return Trajectory(h.topology, init, ev_t, ev_v, ev_s, float(t))


def singleton_processes(h: HarrisSystem, check_times) -> np.ndarray:
    """``out[k, x, y]`` is True iff ``y`` is in the process started from
    ``{x}`` at time ``check_times[k]``; all processes share ``h``."""
    checks = np.asarray(check_times, dtype=np.float64)
    if checks.ndim != 1 or np.any(np.diff(checks) < 0):
        raise DomainError("check times must be a nondecreasing 1-d sequence")
    if checks.size and (checks[0] < 0 or checks[-1] > h.horizon):
        raise DomainError(f"check times must lie in [0, {h.horizon}]")
    n = h.topology.n_vertices
    n_words = max(1, (n + 63) // 64)
    words = _singleton_sweep(h.times, h.kind, h.src, h.dst, n, n_words, checks)
    bits = np.unpackbits(words.view(np.uint8), axis=-1, bitorder="little")
    # bits[k, y, x]: vertex y reached from source x
    return np.swapaxes(bits[:, :, :n].astype(bool), 1, 2)


# -- persistence --------------------------------------------------------------

FORMAT = "treecp-harris"
FORMAT_VERSION = 1


def to_dict(h: HarrisSystem) -> dict:
    events = []
    for time, k, x, y in zip(h.times.tolist(), h.kind.tolist(), h.src.tolist(), h.dst.tolist()):
        if k == RECOVERY:
            events.append([time, "recovery", x])
        else:
            events.append([time, "transmission", x, y])
    return {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "lambda": h.lam,
        "horizon": h.horizon,
        "seed": h.seed,
        "n_vertices": h.topology.n_vertices,
        "edges": h.topology.edges.tolist(),
        "events": events,
    }


def from_dict(data: dict, topology: Optional[GraphTopology] = None) -> HarrisSystem:
    if data.get("format") != FORMAT:
        raise DomainError("not a treecp Harris export")
    if topology is None:
        topology = from_edges(data["n_vertices"], data["edges"])
    rec: dict = {}
    tra: dict = {}
    for ev in data["events"]:
        if ev[1] == "recovery":
            rec.setdefault(int(ev[2]), []).append(ev[0])
        elif ev[1] == "transmission":
            tra.setdefault((int(ev[2]), int(ev[3])), []).append(ev[0])
        else:
            raise DomainError(f"unknown event kind {ev[1]!r}")
    return from_events(topology, data["lambda"], data["horizon"], rec, tra, data.get("seed", 0))


def save_json(h: HarrisSystem, path) -> None:
    Path(path).write_text(json.dumps(to_dict(h)))


def load_json(path, topology: Optional[GraphTopology] = None) -> HarrisSystem:
    return from_dict(json.loads(Path(path).read_text()), topology)


def save_npz(h: HarrisSystem, path) -> None:
    np.savez(
        path, lam=h.lam, horizon=h.horizon, seed=np.uint64(h.seed),
        n_vertices=h.topology.n_vertices, edges=h.topology.edges,
        times=h.times, kind=h.kind, src=h.src, dst=h.dst, stream=h.stream, mark=h.mark,
    )


def load_npz(path, topology: Optional[GraphTopology] = None) -> HarrisSystem:
    with np.load(path) as z:
        if topology is None:
            topology = from_edges(int(z["n_vertices"]), z["edges"])
        return HarrisSystem(
            topology, float(z["lam"]), float(z["horizon"]), int(z["seed"]),
            z["times"], z["kind"], z["src"], z["dst"], z["stream"], z["mark"],
        )
