"""Tree-construction policies driven round by round by the engine.

Max.Stability-DG looks ahead: from the round a tree is needed it grows the
window [i, j] while the intersection of the snapshots stays connected, takes
the Prim tree of that intersection (geometric-mean weights) and keeps it for
the whole window.  MST-DG builds the minimum-distance tree of the current
snapshot and keeps it until an edge stretches past the range or a node dies.
Both pick the leader uniformly at random among the tree's nodes.
"""

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .topology import (
    DGTree,
    SpanningTree,
    StaticGraph,
    _tree_from_parent,
    bfs_root,
    build_static_graph,
    intersect_extend,
    mobile_graph,
    node_coords,
    prim_mst,
    restrict,
)


class Policy(str, enum.Enum):
    MAX_STABILITY = "max-stability"
    MST_DG = "mst-dg"

    def __str__(self):
        return self.value


class StaticHorizon:
    """The snapshots of every round of a run, computed on demand from positions.

    Indexing yields the StaticGraph over all nodes; the epoch search uses the
    positions directly and restricts to the live set itself.
    """

    def __init__(self, positions, tx_range: float, rounds: int | None = None):
        self.positions = np.asarray(positions, dtype=np.float64)
        self.tx_range = float(tx_range)
        self.rounds = len(self.positions) if rounds is None else int(rounds)
        if not 0 < self.rounds <= len(self.positions):
            raise ValueError(f"rounds={rounds} outside (0, {len(self.positions)}]")

    def __len__(self):
        return self.rounds

    def __getitem__(self, r) -> StaticGraph:
        if not 0 <= r < self.rounds:
            raise IndexError(r)
        return build_static_graph(self.positions[r], range(self.positions.shape[1]), self.tx_range, r)


def _find_epoch_dense(horizon: StaticHorizon, i, nodes):
    pts = node_coords(horizon.positions[i], nodes)
    dist, adj = _kernels.unit_disk(pts, horizon.tx_range)
    if not _kernels.connected(adj):
        return None
    with np.errstate(divide="ignore"):
        log_sum = np.where(adj, np.log(dist), 0.0)
    j = i
    while j + 1 < len(horizon):
        nxt_adj, nxt_log = adj.copy(), log_sum.copy()
        _kernels.extend_window(node_coords(horizon.positions[j + 1], nodes), horizon.tx_range, nxt_adj, nxt_log)
        if not _kernels.connected(nxt_adj):
            break
        adj, log_sum = nxt_adj, nxt_log
        j += 1
    weights = np.where(adj, np.exp(log_sum / (j - i + 1)), 0.0)
    parent, ok = _kernels.prim_dense(weights, adj)
    return j, _tree_from_parent(nodes, parent, weights)


def _find_epoch_graphs(horizon, i, nodes):
    g = mobile_graph(restrict(horizon[i], nodes))
    if not np.array_equal(g.nodes, nodes):
        raise ValueError(f"snapshot {i} lacks some live nodes")
    if not _kernels.connected(g.adj):
        return None
    while g.end_round + 1 < len(horizon):
        wider = intersect_extend(g, restrict(horizon[g.end_round + 1], nodes))
        if not _kernels.connected(wider.adj):
            break
        g = wider
    return g.end_round, prim_mst(g)


def max_stability_find_epoch(horizon: Sequence, i: int, live) -> tuple[int, SpanningTree] | None:
    """Longest window [i, j] whose snapshot intersection over ``live`` is connected.

    ``horizon`` is a StaticHorizon or any sequence of StaticGraph indexed by
    round.  Returns ``(j, tree)`` with the Prim tree of G(i, j), or None when
    the live nodes are already disconnected at round i.
    """
    if not 0 <= i < len(horizon):
        raise IndexError(f"round {i} outside horizon of {len(horizon)} rounds")
    nodes = np.array(sorted({int(n) for n in live}), dtype=np.int64)
    if len(nodes) == 0:
        raise ValueError("live set is empty")
    if isinstance(horizon, StaticHorizon):
        return _find_epoch_dense(horizon, i, nodes)
    return _find_epoch_graphs(horizon, i, nodes)


@dataclass
class GathererState:
    """Per-run policy state.

    ``epochs`` keeps every tree that was put in use, with its epoch bounds as
    they finally stood (truncations applied).
    """

    policy: Policy
    tx_range: float
    rng: np.random.Generator
    horizon: Sequence | None = None
    tree: DGTree | None = None
    discovery_count: int = 0
    epochs: list = field(default_factory=list)

    def __post_init__(self):
        self.policy = Policy(self.policy)
        if self.policy is Policy.MAX_STABILITY and self.horizon is None:
            raise ValueError("max-stability needs the snapshot horizon")

    @property
    def leaders(self):
        return [t.leader for t in self.epochs]


def _adopt(state, spanning, round_index, epoch_end):
    nodes = spanning.nodes
    root = nodes[int(state.rng.integers(len(nodes)))]
    tree = bfs_root(spanning, root).with_epoch(round_index, epoch_end)
    state.tree = tree
    state.discovery_count += 1
    state.epochs.append(tree)
    return tree


def max_stability_next_tree(state: GathererState, round_index: int, live, positions=None) -> DGTree | None:
    """Discover the longest-living tree from ``round_index`` over ``live``.

    ``positions`` is accepted for interface symmetry; the look-ahead reads the
    state's horizon.  Returns None (no discovery counted) if the live nodes
    are disconnected at this round.
    """
    found = max_stability_find_epoch(state.horizon, round_index, live)
    if found is None:
        state.tree = None
        return None
    j, spanning = found
    return _adopt(state, spanning, round_index, j)


def mst_dg_next_tree(state: GathererState, round_index: int, live, positions, tx_range=None) -> DGTree | None:
    g = build_static_graph(positions, live, state.tx_range if tx_range is None else tx_range, round_index)
    spanning = prim_mst(g)
    if spanning is None:
        state.tree = None
        return None
    return _adopt(state, spanning, round_index, None)


def next_tree(state: GathererState, round_index: int, live, positions) -> DGTree | None:
    if state.policy is Policy.MAX_STABILITY:
        return max_stability_next_tree(state, round_index, live, positions)
    return mst_dg_next_tree(state, round_index, live, positions)


def _live_lookup(live, members):
    if isinstance(live, np.ndarray) and live.dtype == np.bool_:
        return bool(live[members].all())
    live = live if isinstance(live, (set, frozenset)) else set(live)
    return all(int(n) in live for n in members)


def tree_valid(tree: DGTree, positions, live, tx_range: float) -> bool:
    """True iff every tree node is live and every tree edge is within range.

    ``live`` may be a set of ids or a boolean mask indexed by node id.
    """
    members, kids, parents, _ = tree.arrays
    if not _live_lookup(live, members):
        return False
    if len(kids) == 0:
        return True
    if isinstance(positions, np.ndarray):
        d = np.hypot(*(positions[kids] - positions[parents]).T)
    else:
        d = np.hypot(*(node_coords(positions, kids) - node_coords(positions, parents)).T)
    return bool((d <= tx_range).all())


def tree_in_force(state: GathererState, round_index: int, positions, live) -> bool:
    """Can the current tree gather at this round without rediscovery?"""
    tree = state.tree
    if tree is None:
        return False
    if state.policy is Policy.MAX_STABILITY:
        return round_index <= tree.epoch_end and _live_lookup(live, tree.arrays[0])
    return tree_valid(tree, positions, live, state.tx_range)


def retire(state: GathererState, last_round: int) -> None:
    """Stop using the current tree; its epoch ends at ``last_round``.

    A Max.Stability epoch that was planned to run longer is truncated (the
    failure restart); an MST-DG epoch gets its end for the first time.
    """
    tree = state.tree
    if tree is None:
        return
    end = last_round if tree.epoch_end is None else min(tree.epoch_end, last_round)
    closed = tree.with_epoch(tree.epoch_start, end)
    if state.epochs and state.epochs[-1] is tree:
        state.epochs[-1] = closed
    state.tree = None
