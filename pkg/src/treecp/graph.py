"""Finite graphs and the rooted d-ary tree.

Vertices are integers ``0 .. n_vertices - 1``.  Trees are numbered
breadth-first from the root ``0``: the children of ``v`` are
``d*v + 1, ..., d*v + d`` and level ``m`` is the contiguous id range
``[(d**m - 1)/(d - 1), (d**(m+1) - 1)/(d - 1))``.

Vertex sets are plain boolean numpy arrays of length ``n_vertices``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import DomainError, SizeError

#: Largest vertex count accepted; ids must fit a signed 32-bit C int.
MAX_VERTICES = 2**31 - 1


@dataclass(frozen=True)
class TreeInfo:
    degree: int
    height: int
    root: int = 0


@dataclass(frozen=True, eq=False)
class GraphTopology:
    """Immutable undirected simple graph.

    Attributes
    ----------
    n_vertices : int
    nbr : ndarray of int64, shape (n_vertices, max_degree)
        Neighbour table padded with -1.
    deg : ndarray of int64
    edges : ndarray of int64, shape (n_edges, 2)
        Undirected edges with ``u < v``, sorted.
    arcs : ndarray of int64, shape (2 * n_edges, 2)
        Directed edges ``(x, y)``; arc ``k`` drives transmission stream
        ``n_vertices + k`` in a Harris system.
    tree : TreeInfo or None
        Present only for graphs built by :func:`build_dary_tree`.
    """

    n_vertices: int
    nbr: np.ndarray
    deg: np.ndarray
    edges: np.ndarray
    arcs: np.ndarray
    tree: Optional[TreeInfo] = None

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def max_degree(self) -> int:
        return self.nbr.shape[1]

    @property
    def is_tree(self) -> bool:
        return self.tree is not None

    def neighbors(self, v: int) -> np.ndarray:
        return self.nbr[v, : self.deg[v]]

    def empty_set(self) -> np.ndarray:
        return np.zeros(self.n_vertices, dtype=bool)

    def full_set(self) -> np.ndarray:
        return np.ones(self.n_vertices, dtype=bool)

    def vertex_set(self, members: Iterable[int] = ()) -> np.ndarray:
        """Boolean membership array for ``members``."""
        s = self.empty_set()
        idx = np.fromiter(members, dtype=np.int64)
        if idx.size:
            if idx.min() < 0 or idx.max() >= self.n_vertices:
                raise DomainError("vertex id out of range")
            s[idx] = True
        return s

    def as_vertex_set(self, a) -> np.ndarray:
        """Coerce a boolean array or an iterable of ids to a vertex set."""
        if isinstance(a, np.ndarray) and a.dtype == bool:
            if a.shape != (self.n_vertices,):
                raise DomainError(
                    f"vertex set has shape {a.shape}, expected ({self.n_vertices},)"
                )
            return a
        return self.vertex_set(a)


def _from_edge_array(n: int, edges: np.ndarray, tree: Optional[TreeInfo] = None):
    if n < 0:
        raise DomainError("vertex count must be nonnegative")
    if n > MAX_VERTICES:
        raise SizeError(f"vertex count {n} exceeds {MAX_VERTICES}")
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size:
        if edges.min() < 0 or edges.max() >= n:
            raise DomainError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise DomainError("self-loops are not allowed")
    e = np.sort(edges, axis=1)
    e = e[np.lexsort((e[:, 1], e[:, 0]))]
    if len(e) > 1 and np.any(np.all(e[1:] == e[:-1], axis=1)):
        raise DomainError("duplicate edge")
    deg = np.zeros(n, dtype=np.int64)
    np.add.at(deg, e[:, 0], 1)
    np.add.at(deg, e[:, 1], 1)
    width = int(deg.max()) if n and len(e) else 0
    nbr = np.full((n, max(width, 1)), -1, dtype=np.int64)
    fill = np.zeros(n, dtype=np.int64)
    for u, v in e:
        nbr[u, fill[u]] = v
        fill[u] += 1
        nbr[v, fill[v]] = u
        fill[v] += 1
    arcs = np.concatenate([e, e[:, ::-1]]) if len(e) else np.zeros((0, 2), np.int64)
    arcs = arcs[np.lexsort((arcs[:, 1], arcs[:, 0]))]
    for a in (nbr, deg, e, arcs):
        a.setflags(write=False)
    return GraphTopology(n, nbr, deg, e, np.ascontiguousarray(arcs), tree)


def from_edges(n_vertices: int, edges) -> GraphTopology:
    """Generic graph on ``n_vertices`` vertices from ``(u, v)`` pairs."""
    return _from_edge_array(n_vertices, np.asarray(list(edges), dtype=np.int64))


def path_graph(n_vertices: int) -> GraphTopology:
    return from_edges(n_vertices, [(i, i + 1) for i in range(n_vertices - 1)])


def tree_size(d: int, n: int) -> int:
    return (d ** (n + 1) - 1) // (d - 1)


def build_dary_tree(d: int, n: int) -> GraphTopology:
    """Rooted tree of height ``n`` in which every non-leaf has ``d`` children."""
    if d < 2 or n < 0:
        raise DomainError("need d >= 2 and n >= 0")
    size = tree_size(d, n)
    if size > MAX_VERTICES:
        raise SizeError(f"tree with d={d}, n={n} has {size} vertices")
    child = np.arange(1, size, dtype=np.int64)
    edges = np.stack([(child - 1) // d, child], axis=1)
    return _from_edge_array(size, edges, TreeInfo(d, n, 0))


def read_edge_list(path) -> GraphTopology:
    """Parse the ``u v``-per-line edge-list format.

    Blank lines and lines starting with ``#`` are skipped.  The vertex
    count is one more than the largest id, unless a ``# vertices: N``
    header says otherwise.
    """
    n = None
    pairs = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("vertices:"):
                n = int(body.split(":", 1)[1])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DomainError(f"{path}:{lineno}: expected 'u v', got {raw!r}")
        pairs.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max((max(p) for p in pairs), default=-1)
    return from_edges(n, pairs)


def write_edge_list(t: GraphTopology, path) -> None:
    lines = [f"# vertices: {t.n_vertices}"]
    lines += [f"{u} {v}" for u, v in t.edges]
    Path(path).write_text("\n".join(lines) + "\n")


# -- tree queries -----------------------------------------------------------

def _tree(t: GraphTopology) -> TreeInfo:
    if t.tree is None:
        raise DomainError("operation requires a rooted d-ary tree")
    return t.tree


def _check_vertex(t: GraphTopology, x: int) -> int:
    x = int(x)
    if not 0 <= x < t.n_vertices:
        raise DomainError(f"vertex {x} out of range")
    return x


def level_range(t: GraphTopology, m: int) -> tuple[int, int]:
    """Half-open id range of level ``m``."""
    info = _tree(t)
    if not 0 <= m <= info.height:
        raise DomainError(f"level {m} outside [0, {info.height}]")
    d = info.degree
    return (d**m - 1) // (d - 1), (d ** (m + 1) - 1) // (d - 1)


def depth(t: GraphTopology, x: int) -> int:
    d = _tree(t).degree
    x = _check_vertex(t, x)
    m = 0
    while x > 0:
        x = (x - 1) // d
        m += 1
    return m


def level(t: GraphTopology, m: int) -> np.ndarray:
    lo, hi = level_range(t, m)
    s = t.empty_set()
    s[lo:hi] = True
    return s


def subtree_ranges(t: GraphTopology, x: int, max_rel_depth: Optional[int] = None):
    """Id ranges ``(lo, hi)`` of the descendants of ``x`` at relative depth
    ``0, 1, ...`` (each range is contiguous under breadth-first numbering)."""
    info = _tree(t)
    d = info.degree
    x = _check_vertex(t, x)
    h = info.height - depth(t, x)
    if max_rel_depth is not None:
        h = min(h, max_rel_depth)
    out = []
    lo = hi = x
    for _ in range(h + 1):
        out.append((lo, hi + 1))
        lo, hi = d * lo + 1, d * hi + d
    return out


def sublevel(t: GraphTopology, x: int, m: int) -> np.ndarray:
    """Descendants of ``x`` at distance exactly ``m`` from ``x``."""
    info = _tree(t)
    h = info.height - depth(t, x)
    if not 0 <= m <= h:
        raise DomainError(f"sublevel {m} outside [0, {h}] for vertex {x}")
    lo, hi = subtree_ranges(t, x, m)[m]
    s = t.empty_set()
    s[lo:hi] = True
    return s


def subtree(t: GraphTopology, x: int) -> np.ndarray:
    s = t.empty_set()
    for lo, hi in subtree_ranges(t, x):
        s[lo:hi] = True
    return s


def subtree_ball(t: GraphTopology, x: int, k: int) -> np.ndarray:
    """``x`` and its descendants within distance ``k``."""
    if k < 0:
        raise DomainError("radius must be nonnegative")
    s = t.empty_set()
    for lo, hi in subtree_ranges(t, x, k):
        s[lo:hi] = True
    return s


def subtree_ids(t: GraphTopology, x: int) -> np.ndarray:
    """Ids of ``x`` and its descendants, in the breadth-first order of the
    subtree seen as a tree of its own height."""
    return np.concatenate([np.arange(lo, hi) for lo, hi in subtree_ranges(t, x)])


def parent_i(t: GraphTopology, y: int, i: int = 1) -> int:
    """The ``i``-th ancestor of ``y``; ``parent_i(t, y, 1)`` is the parent."""
    d = _tree(t).degree
    y = _check_vertex(t, y)
    if i < 1:
        raise DomainError("ancestor index must be >= 1")
    for _ in range(i):
        if y == 0:
            raise DomainError("no ancestor beyond the root")
        y = (y - 1) // d
    return y


def dist(t: GraphTopology, x: int, y: int) -> int:
    """Graph distance; ``-1`` when ``x`` and ``y`` are disconnected."""
    x = _check_vertex(t, x)
    y = _check_vertex(t, y)
    if t.tree is not None:
        d = t.tree.degree
        dx, dy = depth(t, x), depth(t, y)
        steps = 0
        while dx > dy:
            x, dx, steps = (x - 1) // d, dx - 1, steps + 1
        while dy > dx:
            y, dy, steps = (y - 1) // d, dy - 1, steps + 1
        while x != y:
            x, y, steps = (x - 1) // d, (y - 1) // d, steps + 2
        return steps
    seen = np.full(t.n_vertices, -1, dtype=np.int64)
    seen[x] = 0
    queue = deque([x])
    while queue:
        u = queue.popleft()
        if u == y:
            return int(seen[u])
        for v in t.neighbors(u):
            if seen[v] < 0:
                seen[v] = seen[u] + 1
                queue.append(int(v))
    return -1
