"""Unit-disk snapshots, their intersections, and the tree kernels run on them.

Graphs are stored densely over a sorted array of node ids: ``adj[a, b]`` and
the weight matrices are indexed by position in ``nodes``.  All graph values
are immutable once built.
"""

from collections import deque
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import _kernels
from .errors import UsageError


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def node_coords(positions, nodes) -> np.ndarray:
    """(k, 2) coordinates of ``nodes`` from an (N, 2) array or an id->point map."""
    nodes = np.asarray(nodes, dtype=np.int64)
    if isinstance(positions, Mapping):
        if len(nodes) == 0:
            return np.empty((0, 2))
        return np.array([positions[int(n)] for n in nodes], dtype=np.float64).reshape(-1, 2)
    return np.ascontiguousarray(np.asarray(positions, dtype=np.float64)[nodes]).reshape(-1, 2)


def _sorted_ids(nodes):
    return np.array(sorted({int(n) for n in nodes}), dtype=np.int64)


class _DenseGraph:
    nodes: np.ndarray
    adj: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def live_nodes(self) -> frozenset:
        return frozenset(int(n) for n in self.nodes)

    def index_of(self, node) -> int:
        i = int(np.searchsorted(self.nodes, node))
        if i >= len(self.nodes) or self.nodes[i] != node:
            raise KeyError(node)
        return i

    def edges(self) -> dict:
        """{(u, v): weight} with u < v."""
        w = self.weights
        a, b = np.nonzero(np.triu(self.adj, 1))
        return {(int(self.nodes[i]), int(self.nodes[j])): float(w[i, j]) for i, j in zip(a, b)}

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(self.adj)) // 2

    def has_edge(self, u, v) -> bool:
        try:
            return bool(self.adj[self.index_of(u), self.index_of(v)])
        except KeyError:
            return False

    def weight(self, u, v) -> float:
        i, j = self.index_of(u), self.index_of(v)
        if not self.adj[i, j]:
            raise KeyError((u, v))
        return float(self.weights[i, j])


@dataclass(frozen=True, eq=False)
class StaticGraph(_DenseGraph):
    """Unit-disk snapshot of the live nodes at one round."""

    round: int
    nodes: np.ndarray
    dist: np.ndarray
    adj: np.ndarray

    @property
    def weights(self):
        return self.dist


@dataclass(frozen=True, eq=False)
class MobileGraph(_DenseGraph):
    """Edge-wise intersection of the snapshots of rounds start..end.

    Edge weights are geometric means of the per-round distances, kept as a
    running sum of natural logs and exponentiated on read.
    """

    start_round: int
    end_round: int
    nodes: np.ndarray
    adj: np.ndarray
    log_sum: np.ndarray

    @property
    def span(self) -> int:
        return self.end_round - self.start_round + 1

    @property
    def weights(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.adj, np.exp(self.log_sum / self.span), 0.0)


@dataclass(frozen=True)
class SpanningTree:
    nodes: tuple
    edges: tuple          # sorted (u, v) pairs with u < v
    total_weight: float


@dataclass(frozen=True)
class DGTree:
    """A spanning tree rooted at its leader by BFS.

    ``order`` is the BFS visiting order; ``children`` lists are ascending.
    ``epoch_end`` is None while the end of the tree's use is not known yet.
    """

    leader: int
    parent: dict
    children: dict
    order: tuple
    epoch_start: int = 0
    epoch_end: int | None = None

    @property
    def nodes(self) -> tuple:
        return self.order

    def depth(self) -> dict:
        d = {self.leader: 0}
        for n in self.order[1:]:
            d[n] = d[self.parent[n]] + 1
        return d

    def edge_set(self) -> set:
        return {(min(c, p), max(c, p)) for c, p in self.parent.items()}

    def with_epoch(self, start, end):
        return DGTree(self.leader, self.parent, self.children, self.order, start, end)

    # Flat views used on the per-round hot path.
    @property
    def arrays(self):
        cached = self.__dict__.get("_arrays")
        if cached is None:
            kids = np.fromiter(self.parent.keys(), np.int64, len(self.parent))
            parents = np.fromiter(self.parent.values(), np.int64, len(self.parent))
            members = np.array(self.order, dtype=np.int64)
            fan_in = np.array([len(self.children.get(n, ())) for n in self.order], dtype=np.int64)
            cached = (members, kids, parents, fan_in)
            object.__setattr__(self, "_arrays", cached)
        return cached


def build_static_graph(positions, live, tx_range: float, round_index: int = 0) -> StaticGraph:
    """Unit-disk graph over ``live``: edge iff Euclidean distance <= tx_range."""
    if not tx_range > 0:
        raise ValueError(f"tx_range must be positive, got {tx_range}")
    nodes = _sorted_ids(live)
    dist, adj = _kernels.unit_disk(node_coords(positions, nodes), float(tx_range))
    return StaticGraph(round_index, _frozen(nodes), _frozen(dist), _frozen(adj))


def restrict(g: StaticGraph, live) -> StaticGraph:
    """The sub-snapshot induced by ``live`` (ids absent from ``g`` are ignored)."""
    keep = np.isin(g.nodes, _sorted_ids(live))
    idx = np.flatnonzero(keep)
    sub = np.ix_(idx, idx)
    return StaticGraph(g.round, _frozen(g.nodes[idx]), _frozen(g.dist[sub]), _frozen(g.adj[sub]))


def mobile_graph(s: StaticGraph) -> MobileGraph:
    """G(i, i): the mobile graph of a single snapshot."""
    with np.errstate(divide="ignore"):
        log_sum = np.where(s.adj, np.log(s.dist), 0.0)
    return MobileGraph(s.round, s.round, s.nodes, s.adj, _frozen(log_sum))


def intersect_extend(g: MobileGraph, s: StaticGraph) -> MobileGraph:
    """G(i, j+1) from G(i, j) and the snapshot of round j+1."""
    if s.round != g.end_round + 1:
        raise UsageError(f"snapshot of round {s.round} cannot extend window ending at {g.end_round}")
    if not np.array_equal(g.nodes, s.nodes):
        raise UsageError("snapshot and mobile graph are over different node sets")
    adj = g.adj & s.adj
    with np.errstate(divide="ignore"):
        log_sum = np.where(adj, g.log_sum + np.log(np.where(adj, s.dist, 1.0)), 0.0)
    return MobileGraph(g.start_round, s.round, g.nodes, _frozen(adj), _frozen(log_sum))


def graph_connected(g) -> bool:
    return bool(_kernels.connected(g.adj))


def prim_mst(g) -> SpanningTree | None:
    """Minimum-weight spanning tree of a static or mobile graph.

    Returns None when the graph is disconnected.  Equal weights are broken by
    the smaller (min endpoint id, max endpoint id) pair, which makes the
    result unique.
    """
    weights = np.ascontiguousarray(g.weights)
    parent, ok = _kernels.prim_dense(weights, np.ascontiguousarray(g.adj))
    if not ok:
        return None
    return _tree_from_parent(g.nodes, parent, weights)


def _tree_from_parent(nodes, parent, weights):
    edges, total = [], 0.0
    for v in range(1, len(nodes)):
        p = int(parent[v])
        u, w = int(nodes[p]), int(nodes[v])
        edges.append((min(u, w), max(u, w)))
        total += float(weights[p, v])
    return SpanningTree(tuple(int(n) for n in nodes), tuple(sorted(edges)), total)


def bfs_root(tree: SpanningTree, root: int) -> DGTree:
    """Orient ``tree`` away from ``root``; neighbours are visited in ascending id."""
    if root not in tree.nodes:
        raise UsageError(f"root {root} is not a node of the tree")
    nbrs = {n: [] for n in tree.nodes}
    for u, v in tree.edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    parent, children, order = {}, {}, [root]
    queue = deque([root])
    seen = {root}
    while queue:
        u = queue.popleft()
        kids = []
        for v in sorted(nbrs[u]):
            if v not in seen:
                seen.add(v)
                parent[v] = u
                kids.append(v)
                order.append(v)
                queue.append(v)
        children[u] = kids
    return DGTree(root, parent, children, tuple(order))


def is_connected(nodes, positions, tx_range: float) -> bool:
    """Whether the unit-disk graph over ``nodes`` is a single component."""
    ids = _sorted_ids(nodes)
    return bool(_kernels.unit_disk_connected(node_coords(positions, ids), float(tx_range)))


def dump_edge_list(g) -> str:
    """Text dump: a ``#`` header line then ``u v weight`` per edge (u < v)."""
    if isinstance(g, MobileGraph):
        head = f"# mobile rounds={g.start_round}..{g.end_round}"
    else:
        head = f"# static round={g.round}"
    lines = [f"{head} nodes={len(g.nodes)} edges={g.edge_count}"]
    lines += [f"{u} {v} {w!r}" for (u, v), w in sorted(g.edges().items())]
    return "\n".join(lines) + "\n"
