"""Simulation runs, pairwise policy comparison and the experiment grid."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import _kernels, _rng
from .energy import EnergyConfig, EnergyLedger, discovery_charges, gathering_charges
from .errors import ConfigError, UsageError
from .gatherers import GathererState, Policy, StaticHorizon, next_tree, retire, tree_in_force
from .metrics import RunResult, aggregate_batch, sample_probes, update_coverage_loss
from .mobility import FieldConfig, MobilityConfig, MobilityProfile, generate_profile

DEFAULT_HORIZON_S = 6000.0


@dataclass(frozen=True)
class SimConfig:
    field: FieldConfig = FieldConfig()
    mobility: MobilityConfig = MobilityConfig()
    energy: EnergyConfig = EnergyConfig()
    tx_range: float = 25.0
    sensing_range: float | None = None
    policy: Policy = Policy.MAX_STABILITY
    run_seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.tx_range, (int, float)) and math.isfinite(self.tx_range) and self.tx_range > 0):
            raise ConfigError("tx_range", f"must be a positive finite number, got {self.tx_range!r}")
        if self.sensing_range is None:
            object.__setattr__(self, "sensing_range", self.tx_range / 2)
        elif not self.sensing_range > 0:
            raise ConfigError("sensing_range", f"must be positive, got {self.sensing_range!r}")
        elif self.tx_range < 2 * self.sensing_range:
            raise ConfigError(
                "sensing_range",
                f"tx_range ({self.tx_range}) must be at least twice sensing_range ({self.sensing_range})",
            )
        try:
            object.__setattr__(self, "policy", Policy(self.policy))
        except ValueError:
            raise ConfigError("policy", f"unknown policy {self.policy!r}") from None
        try:
            _rng.check_seed(self.run_seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError("run_seed", str(exc)) from None

    @property
    def round_period(self) -> float:
        return self.mobility.round_period

    @property
    def horizon_rounds(self) -> int:
        return self.mobility.horizon_rounds


def round_time(r: int, round_period: float) -> float:
    """Round r (0-based) completes one period after it starts: t = (r + 1) * period."""
    return (r + 1) * round_period


def _check_profile(cfg, profile):
    if profile.field != cfg.field:
        raise UsageError(f"profile field {profile.field} differs from config field {cfg.field}")
    pm, cm = profile.mobility, cfg.mobility
    if pm.node_count != cm.node_count or profile.node_count != cm.node_count:
        raise UsageError(f"profile has {profile.node_count} nodes, config expects {cm.node_count}")
    if pm.round_period != cm.round_period:
        raise UsageError(f"profile round period {pm.round_period} s differs from config {cm.round_period} s")
    if profile.horizon_rounds < cm.horizon_rounds:
        raise UsageError(f"profile covers {profile.horizon_rounds} rounds, config needs {cm.horizon_rounds}")


def run_simulation(cfg: SimConfig, profile: MobilityProfile, trace=None, energy_log=None) -> RunResult:
    """Simulate one policy on one profile until network lifetime or horizon end.

    Per round: rebuild the tree if the current one is not in force (charging
    the flood on success), gather over the tree or count a no-tree round,
    then handle failures: a failing round is completed with the old tree,
    and unless the network lifetime is reached a new tree is discovered at
    the same round over the survivors.  Coverage is sampled last.

    ``trace``, if given, is a list that receives the final GathererState.
    ``energy_log(round, time_s, residual)`` is called after every round.
    """
    _check_profile(cfg, profile)
    n = cfg.mobility.node_count
    horizon = cfg.horizon_rounds
    period = cfg.round_period
    tx = float(cfg.tx_range)
    sink = cfg.field.sink
    fld = cfg.field
    all_pos = profile.positions

    state = GathererState(
        cfg.policy,
        tx,
        _rng.stream(cfg.run_seed, "leader"),
        StaticHorizon(all_pos, tx, horizon) if cfg.policy is Policy.MAX_STABILITY else None,
    )
    probe_rng = _rng.stream(cfg.run_seed, "coverage")
    ledger = EnergyLedger(n, cfg.energy.initial_energy)
    result = RunResult(policy=cfg.policy.value)
    curve = result.coverage_loss_curve
    live_ids = np.arange(n)
    live_mask = np.ones(n, dtype=bool)
    failures, failed_nodes = [], []
    sensing = float(cfg.sensing_range)

    def discover(r, pos):
        tree = next_tree(state, r, live_ids, pos)
        if tree is not None:
            ledger.charge(discovery_charges(live_ids, pos, cfg.energy, tx, n), round_time(r, period))
        return tree

    r = -1
    for r in range(horizon):
        t = round_time(r, period)
        pos = all_pos[r]
        before = len(ledger.failure_time)

        tree = state.tree
        if not tree_in_force(state, r, pos, live_mask):
            retire(state, r - 1)
            tree = discover(r, pos)
        if tree is None:
            result.no_tree_rounds += 1
        else:
            ledger.charge(gathering_charges(tree, pos, cfg.energy, sink, n), t)
            result.rounds_completed += 1

        stop = False
        while True:
            fresh = len(ledger.failure_time) > before
            if fresh:
                failed = sorted(list(ledger.failure_time)[before:])
                before = len(ledger.failure_time)
                failures.extend(t for _ in failed)
                failed_nodes.extend(failed)
                live_mask[failed] = False
                live_ids = np.flatnonzero(live_mask)
            elif state.tree is not None:
                break
            # A tree in force over the live set proves it connected; only
            # check the lifetime condition when there is no such tree.
            live_pts = np.ascontiguousarray(pos[live_ids])
            if not _kernels.unit_disk_connected(live_pts, tx) and _kernels.unit_disk_connected(pos, tx):
                result.network_lifetime = t
                stop = True
                break
            if not fresh or len(live_ids) == 0:
                break
            old = state.tree
            retire(state, r)
            if discover(r, pos) is not None and old is not None:
                prev = state.epochs[-2]
                state.epochs[-2] = prev.with_epoch(prev.epoch_start, r - 1)

        live_pts = np.ascontiguousarray(pos[live_ids])
        uncovered = _kernels.uncovered_count(sample_probes(probe_rng, fld.width, fld.height), live_pts, sensing)
        update_coverage_loss(curve, uncovered / 100, t)
        if energy_log is not None:
            energy_log(r, t, ledger.residual)
        if stop or len(live_ids) == 0:
            break

    retire(state, r)
    result.rounds_elapsed = r + 1
    result.failure_times = failures
    result.failed_nodes = failed_nodes
    result.node_lifetime = failures[0] if failures else None
    result.discovery_count = state.discovery_count
    result.leaders = state.leaders
    if trace is not None:
        trace.append(state)
    return result


def run_pairwise(cfg: SimConfig, profile: MobilityProfile) -> tuple[RunResult, RunResult]:
    """Both policies on the same profile, seeds and initial energy."""
    return (
        run_simulation(replace(cfg, policy=Policy.MAX_STABILITY), profile),
        run_simulation(replace(cfg, policy=Policy.MST_DG), profile),
    )


# -- experiment grid -------------------------------------------------------


class Cell(NamedTuple):
    tx_range: float
    v_max: float
    static_count: int

    @property
    def key(self):
        return f"tx{self.tx_range:g}_v{self.v_max:g}_s{self.static_count}"


def _milli(x):
    return int(round(float(x) * 1000))


@dataclass(frozen=True)
class ExperimentGrid:
    tx_ranges: tuple = (25.0, 40.0)
    v_maxes: tuple = (3.0, 10.0, 20.0)
    static_counts: tuple = (0, 20, 50, 80)
    profiles_per_cell: int = 20
    base_seed: int = 0
    node_count: int = 100
    horizon_s: float = DEFAULT_HORIZON_S
    round_period: float = 0.25
    field: FieldConfig = FieldConfig()
    energy: EnergyConfig = EnergyConfig()

    def __post_init__(self):
        for name in ("tx_ranges", "v_maxes", "static_counts"):
            values = tuple(getattr(self, name))
            if not values:
                raise ConfigError(name, "must not be empty")
            object.__setattr__(self, name, values)
        if self.profiles_per_cell < 1:
            raise ConfigError("profiles_per_cell", f"must be >= 1, got {self.profiles_per_cell}")
        try:
            _rng.check_seed(self.base_seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError("base_seed", str(exc)) from None
        if not self.horizon_s > 0:
            raise ConfigError("horizon_s", f"must be positive, got {self.horizon_s}")

    @property
    def horizon_rounds(self) -> int:
        return max(1, int(round(self.horizon_s / self.round_period)))

    def cells(self) -> list:
        return [
            Cell(float(tx), float(v), int(s))
            for tx in self.tx_ranges
            for v in self.v_maxes
            for s in self.static_counts
        ]

    def profile_seed(self, v_max, static_count, index) -> int:
        # independent of tx_range: both ranges replay the same profiles
        return _rng.derive_seed(self.base_seed, "profile", _milli(v_max), int(static_count), int(index))

    def run_seed(self, cell: Cell, index) -> int:
        return _rng.derive_seed(
            self.base_seed, "run", _milli(cell.tx_range), _milli(cell.v_max), cell.static_count, int(index)
        )

    def mobility(self, v_max, static_count, index) -> MobilityConfig:
        return MobilityConfig(
            node_count=self.node_count,
            static_count=int(static_count),
            v_max=float(v_max),
            round_period=self.round_period,
            horizon_rounds=self.horizon_rounds,
            seed=self.profile_seed(v_max, static_count, index),
        )

    def sim_config(self, cell: Cell, index) -> SimConfig:
        return SimConfig(
            field=self.field,
            mobility=self.mobility(cell.v_max, cell.static_count, index),
            energy=self.energy,
            tx_range=cell.tx_range,
            run_seed=self.run_seed(cell, index),
        )


@dataclass
class CellOutcome:
    cell: Cell
    max_stability: list = field(default_factory=list)
    mst_dg: list = field(default_factory=list)

    def summaries(self):
        return aggregate_batch(self.max_stability), aggregate_batch(self.mst_dg)


def _label(result, cell, index, seed):
    result.labels = {
        "tx_range": cell.tx_range,
        "v_max": cell.v_max,
        "static_count": cell.static_count,
        "profile": index,
        "run_seed": seed,
    }
    return result


def _run_group(grid, v_max, static_count, cells):
    """All cells sharing (v_max, static_count): each profile is generated once."""
    outcomes = {c: CellOutcome(c) for c in cells}
    for index in range(grid.profiles_per_cell):
        profile = generate_profile(grid.field, grid.mobility(v_max, static_count, index))
        for c in cells:
            cfg = grid.sim_config(c, index)
            a, b = run_pairwise(cfg, profile)
            outcomes[c].max_stability.append(_label(a, c, index, cfg.run_seed))
            outcomes[c].mst_dg.append(_label(b, c, index, cfg.run_seed))
    return list(outcomes.values())


def run_grid(grid: ExperimentGrid, cells=None, workers: int = 1, progress=None) -> list:
    """Run every requested cell pairwise; returns CellOutcomes in canonical cell order.

    Seeds depend only on a cell's identity and the profile index, so any
    subset or ordering of ``cells`` produces the same per-cell results.
    """
    cells = grid.cells() if cells is None else [Cell(float(c[0]), float(c[1]), int(c[2])) for c in cells]
    groups = {}
    for c in cells:
        groups.setdefault((c.v_max, c.static_count), [])
        if c not in groups[(c.v_max, c.static_count)]:
            groups[(c.v_max, c.static_count)].append(c)
    jobs = [(grid, v, s, sorted(cs)) for (v, s), cs in sorted(groups.items())]

    outcomes = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for done in pool.map(_run_group_job, jobs):
                outcomes.extend(done)
                if progress:
                    progress(done)
    else:
        for job in jobs:
            done = _run_group(*job)
            outcomes.extend(done)
            if progress:
                progress(done)
    return sorted(outcomes, key=lambda o: o.cell)


def _run_group_job(job):
    return _run_group(*job)
