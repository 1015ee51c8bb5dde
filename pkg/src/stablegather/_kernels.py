"""Compiled inner loops.

Everything here works on dense per-graph arrays indexed 0..k-1 (the caller
maps indices back to node ids).  Index order must follow node-id order so
that index-based tie-breaks match id-based ones.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _edge_less(w1, a1, b1, w2, a2, b2):
    # Total order on undirected edges: (weight, min endpoint, max endpoint).
    if w1 != w2:
        return w1 < w2
    lo1, hi1 = min(a1, b1), max(a1, b1)
    lo2, hi2 = min(a2, b2), max(a2, b2)
    if lo1 != lo2:
        return lo1 < lo2
    return hi1 < hi2


@njit(cache=True)
def prim_dense(weight, adj):
    """Dense O(k^2) Prim.

    Returns ``(parent, ok)``; ``parent[v]`` is the tree neighbour through which
    ``v`` joined (-1 for the start vertex 0).  ``ok`` is False when the graph is
    disconnected, in which case ``parent`` is partial.
    """
    k = weight.shape[0]
    parent = np.full(k, -1, np.int64)
    key = np.full(k, np.inf)
    in_tree = np.zeros(k, np.bool_)
    if k == 0:
        return parent, True
    in_tree[0] = True
    for v in range(1, k):
        if adj[0, v]:
            key[v] = weight[0, v]
            parent[v] = 0
    for _ in range(k - 1):
        best = -1
        for v in range(k):
            if in_tree[v] or parent[v] < 0:
                continue
            if best < 0 or _edge_less(key[v], parent[v], v, key[best], parent[best], best):
                best = v
        if best < 0:
            return parent, False
        in_tree[best] = True
        for v in range(k):
            if in_tree[v] or not adj[best, v]:
                continue
            w = weight[best, v]
            if parent[v] < 0 or _edge_less(w, best, v, key[v], parent[v], v):
                key[v] = w
                parent[v] = best
    return parent, True


@njit(cache=True)
def connected(adj):
    """True iff the graph given by a symmetric boolean matrix is one component."""
    k = adj.shape[0]
    if k <= 1:
        return True
    seen = np.zeros(k, np.bool_)
    stack = np.empty(k, np.int64)
    seen[0] = True
    stack[0] = 0
    top = 1
    count = 1
    while top > 0:
        top -= 1
        u = stack[top]
        for v in range(k):
            if adj[u, v] and not seen[v]:
                seen[v] = True
                stack[top] = v
                top += 1
                count += 1
    return count == k


@njit(cache=True)
def unit_disk(points, tx_range):
    """Distance matrix and inclusive unit-disk adjacency (no self loops)."""
    k = points.shape[0]
    dist = np.zeros((k, k))
    adj = np.zeros((k, k), np.bool_)
    for a in range(k):
        for b in range(a + 1, k):
            dx = points[a, 0] - points[b, 0]
            dy = points[a, 1] - points[b, 1]
            d = np.sqrt(dx * dx + dy * dy)
            dist[a, b] = d
            dist[b, a] = d
            if d <= tx_range:
                adj[a, b] = True
                adj[b, a] = True
    return dist, adj


@njit(cache=True)
def unit_disk_connected(points, tx_range):
    k = points.shape[0]
    if k <= 1:
        return True
    seen = np.zeros(k, np.bool_)
    stack = np.empty(k, np.int64)
    seen[0] = True
    stack[0] = 0
    top = 1
    count = 1
    while top > 0:
        top -= 1
        u = stack[top]
        for v in range(k):
            if seen[v]:
                continue
            dx = points[u, 0] - points[v, 0]
            dy = points[u, 1] - points[v, 1]
            # distances, not squares, so the boundary matches unit_disk()
            if np.sqrt(dx * dx + dy * dy) <= tx_range:
                seen[v] = True
                stack[top] = v
                top += 1
                count += 1
    return count == k


@njit(cache=True)
def degrees(points, tx_range):
    k = points.shape[0]
    deg = np.zeros(k, np.int64)
    for a in range(k):
        for b in range(a + 1, k):
            dx = points[a, 0] - points[b, 0]
            dy = points[a, 1] - points[b, 1]
            if np.sqrt(dx * dx + dy * dy) <= tx_range:
                deg[a] += 1
                deg[b] += 1
    return deg


@njit(cache=True)
def extend_window(points, tx_range, adj, logsum):
    """Intersect one more snapshot into (adj, logsum) in place."""
    k = points.shape[0]
    for a in range(k):
        for b in range(a + 1, k):
            if not adj[a, b]:
                continue
            dx = points[a, 0] - points[b, 0]
            dy = points[a, 1] - points[b, 1]
            d = np.sqrt(dx * dx + dy * dy)
            if d <= tx_range:
                ls = logsum[a, b] + np.log(d)
                logsum[a, b] = ls
                logsum[b, a] = ls
            else:
                adj[a, b] = False
                adj[b, a] = False


@njit(cache=True)
def uncovered_count(probes, points, sensing_range):
    """Number of probes farther than ``sensing_range`` from every point."""
    count = 0
    for p in range(probes.shape[0]):
        covered = False
        for q in range(points.shape[0]):
            dx = probes[p, 0] - points[q, 0]
            dy = probes[p, 1] - points[q, 1]
            if np.sqrt(dx * dx + dy * dy) <= sensing_range:
                covered = True
                break
        if not covered:
            count += 1
    return count


@njit(cache=True)
def walk(x0, y0, waypoints, dt, out):
    """Zero-pause Random Waypoint trajectory sampled every ``dt`` seconds.

    ``waypoints`` rows are (x, y, speed) legs consumed in order.  Fills
    ``out[r]`` with the position after r periods and returns the number of
    legs started, or -1 when the supplied legs ran out before the horizon.
    """
    n = out.shape[0]
    m = waypoints.shape[0]
    x = x0
    y = y0
    out[0, 0] = x
    out[0, 1] = y
    if n == 1:
        return 0
    if m == 0:
        return -1
    leg = 0
    tx = waypoints[0, 0]
    ty = waypoints[0, 1]
    speed = waypoints[0, 2]
    for r in range(1, n):
        budget = dt
        while budget > 0.0:
            dx = tx - x
            dy = ty - y
            dist = np.sqrt(dx * dx + dy * dy)
            reach = speed * budget
            if dist <= reach:
                x = tx
                y = ty
                budget -= dist / speed
                leg += 1
                if leg >= m:
                    return -1
                tx = waypoints[leg, 0]
                ty = waypoints[leg, 1]
                speed = waypoints[leg, 2]
            else:
                frac = reach / dist
                x += dx * frac
                y += dy * frac
                budget = 0.0
        out[r, 0] = x
        out[r, 1] = y
    return leg + 1
