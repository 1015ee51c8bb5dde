"""Lifetime and coverage-loss metrics, per run and aggregated over profiles."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import UsageError
from .topology import is_connected, node_coords

N_PROBES = 100
COVERAGE_STEPS = 100
COVERAGE_TARGETS = tuple(round(k / COVERAGE_STEPS, 2) for k in range(1, COVERAGE_STEPS + 1))


@dataclass
class RunResult:
    """Outcome of one policy on one profile.

    Times are in seconds.  ``network_lifetime`` is None when the horizon ran
    out before the live network disconnected; ``node_lifetime`` is None when
    no node failed.  ``failed_nodes[x]`` is the node behind
    ``failure_times[x]``.  ``coverage_loss_curve`` maps a target fraction
    (0.01 steps) to the first time it was observed.
    """

    policy: str
    node_lifetime: float | None = None
    network_lifetime: float | None = None
    failure_times: list = field(default_factory=list)
    failed_nodes: list = field(default_factory=list)
    coverage_loss_curve: dict = field(default_factory=dict)
    discovery_count: int = 0
    rounds_completed: int = 0
    no_tree_rounds: int = 0
    rounds_elapsed: int = 0
    leaders: list = field(default_factory=list)
    labels: dict = field(default_factory=dict)

    @property
    def failure_count(self) -> int:
        return len(self.failure_times)


@dataclass
class BatchSummary:
    n_profiles: int
    mean_node_lifetime: float | None
    mean_network_lifetime: float | None
    mean_discovery_count: float
    mean_rounds_completed: float
    mean_no_tree_rounds: float
    node_lifetime_profiles: int
    network_lifetime_profiles: int
    mean_failure_time: dict          # x -> mean time of the x-th failure
    failure_probability: dict        # x -> share of profiles with >= x failures
    mean_coverage_loss_time: dict    # f -> mean first time f was lost
    coverage_loss_probability: dict  # f -> share of profiles that lost f


def network_lifetime_check(live, all_nodes, positions, tx_range: float) -> bool:
    """True when the live nodes are disconnected although all nodes would be connected."""
    if is_connected(live, positions, tx_range):
        return False
    return is_connected(all_nodes, positions, tx_range)


def sample_probes(rng: np.random.Generator, width=100.0, height=100.0, n=N_PROBES) -> np.ndarray:
    return rng.random((n, 2)) * (width, height)


def coverage_fraction(positions, live, sensing_range: float, rng=None, field=None, probes=None) -> float:
    """Share of probe points farther than ``sensing_range`` from every live node.

    Probes are 100 uniform points of ``field`` (default 100 m x 100 m) drawn
    from ``rng`` unless explicit ``probes`` are given.
    """
    if not sensing_range > 0:
        raise ValueError(f"sensing_range must be positive, got {sensing_range}")
    if probes is None:
        if rng is None:
            raise UsageError("coverage_fraction needs an rng or explicit probes")
        width, height = (field.width, field.height) if field is not None else (100.0, 100.0)
        probes = sample_probes(rng, width, height)
    probes = np.ascontiguousarray(probes, dtype=np.float64).reshape(-1, 2)
    pts = node_coords(positions, sorted({int(n) for n in live}))
    return _kernels.uncovered_count(probes, pts, float(sensing_range)) / len(probes)


def update_coverage_loss(curve: dict, current_fraction: float, time_s: float) -> dict:
    """Record first-hit times for every target fraction reached by ``current_fraction``.

    Targets are consecutive multiples of 0.01, so the next unrecorded target
    is the (len(curve)+1)-th one.  Recorded times are never overwritten.
    """
    k = len(curve)
    while k < COVERAGE_STEPS and current_fraction >= COVERAGE_TARGETS[k] - 1e-9:
        curve[COVERAGE_TARGETS[k]] = time_s
        k += 1
    return curve


def _mean(values):
    return math.fsum(values) / len(values) if values else None


def aggregate_batch(results) -> BatchSummary:
    """Means over the profiles where each quantity is defined, plus the
    per-x failure and per-fraction coverage-loss probabilities."""
    results = list(results)
    if not results:
        raise UsageError("aggregate_batch needs at least one RunResult")
    n = len(results)
    node_lt = [r.node_lifetime for r in results if r.node_lifetime is not None]
    net_lt = [r.network_lifetime for r in results if r.network_lifetime is not None]

    by_x = {}
    for r in results:
        for x, t in enumerate(r.failure_times, start=1):
            by_x.setdefault(x, []).append(t)
    by_f = {}
    for r in results:
        for f, t in r.coverage_loss_curve.items():
            by_f.setdefault(f, []).append(t)

    return BatchSummary(
        n_profiles=n,
        mean_node_lifetime=_mean(node_lt),
        mean_network_lifetime=_mean(net_lt),
        mean_discovery_count=_mean([r.discovery_count for r in results]),
        mean_rounds_completed=_mean([r.rounds_completed for r in results]),
        mean_no_tree_rounds=_mean([r.no_tree_rounds for r in results]),
        node_lifetime_profiles=len(node_lt),
        network_lifetime_profiles=len(net_lt),
        mean_failure_time={x: _mean(ts) for x, ts in sorted(by_x.items())},
        failure_probability={x: len(ts) / n for x, ts in sorted(by_x.items())},
        mean_coverage_loss_time={f: _mean(ts) for f, ts in sorted(by_f.items())},
        coverage_loss_probability={f: len(ts) / n for f, ts in sorted(by_f.items())},
    )


def coverage_loss_at(curve: dict, time_s: float) -> float:
    """Largest target fraction whose first-hit time is <= ``time_s`` (0.0 if none)."""
    hit = [f for f, t in curve.items() if t <= time_s]
    return max(hit) if hit else 0.0


def common_timeline(max_results, mst_results) -> dict | None:
    """Coverage loss of both policies at the smaller of their mean network lifetimes.

    For each policy: the mean over profiles of the coverage-loss fraction
    reached by that time, and the share of profiles that reached at least
    that mean fraction (rounded to the 0.01 grid).
    """
    a, b = aggregate_batch(max_results), aggregate_batch(mst_results)
    if a.mean_network_lifetime is None or b.mean_network_lifetime is None:
        return None
    t = min(a.mean_network_lifetime, b.mean_network_lifetime)
    out = {"time_s": t}
    for name, results in (("max-stability", max_results), ("mst-dg", mst_results)):
        reached = [coverage_loss_at(r.coverage_loss_curve, t) for r in results]
        mean = math.fsum(reached) / len(reached)
        level = round(mean, 2)
        prob = sum(1 for f in reached if f >= level - 1e-9) / len(reached)
        out[name] = {"mean_fraction": mean, "probability": prob}
    return out
