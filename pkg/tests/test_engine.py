import math
from dataclasses import asdict, replace

import numpy as np
import pytest

from invariants import lifetime_violations, run_violations
from stablegather import engine
from stablegather.energy import EnergyConfig
from stablegather.engine import Cell, ExperimentGrid, SimConfig, round_time, run_grid, run_pairwise, run_simulation
from stablegather.errors import ConfigError, UsageError
from stablegather.gatherers import Policy
from stablegather.mobility import FieldConfig, MobilityConfig, MobilityProfile, generate_profile
from stablegather.reports import write_results_csv

INF = EnergyConfig(initial_energy=math.inf)


def fixed_profile(frames, static=True):
    pos = np.array(frames, dtype=float)
    t, n, _ = pos.shape
    mob = MobilityConfig(node_count=n, static_count=n if static else 0, v_max=100.0, horizon_rounds=t)
    return MobilityProfile(FieldConfig(), mob, pos, range(n) if static else ())


def cfg_for(profile, **kw):
    return SimConfig(field=profile.field, mobility=profile.mobility, **kw)


def random_profile(seed, n=15, rounds=400, v=3.0, static=0):
    mob = MobilityConfig(node_count=n, static_count=static, v_max=v, horizon_rounds=rounds, seed=seed)
    return generate_profile(FieldConfig(), mob)


def epochs_of(cfg, profile):
    trace = []
    res = run_simulation(cfg, profile, trace=trace)
    return res, [(t.epoch_start, t.epoch_end, tuple(sorted(t.nodes))) for t in trace[0].epochs]


def test_round_time():
    assert round_time(0, 0.25) == 0.25
    assert round_time(23999, 0.25) == 6000.0


def test_sim_config_validation():
    with pytest.raises(ConfigError) as err:
        SimConfig(tx_range=25.0, sensing_range=13.0)
    assert err.value.field == "sensing_range"
    assert SimConfig(tx_range=40.0).sensing_range == 20.0
    with pytest.raises(ConfigError):
        SimConfig(policy="greedy")
    with pytest.raises(ConfigError):
        SimConfig(tx_range=-1.0)


def test_profile_mismatch_is_usage_error():
    p = fixed_profile([[[0, 0], [10, 0]]] * 5)
    with pytest.raises(UsageError):
        run_simulation(SimConfig(mobility=MobilityConfig(node_count=3, horizon_rounds=5)), p)
    with pytest.raises(UsageError):
        run_simulation(SimConfig(mobility=replace(p.mobility, horizon_rounds=6)), p)


@pytest.mark.parametrize("policy", list(Policy))
def test_static_topology_one_discovery(policy):
    p = fixed_profile([[[0, 0], [10, 0], [20, 5], [5, 15]]] * 40)
    res = run_simulation(cfg_for(p, energy=INF, policy=policy), p)
    assert res.discovery_count == 1
    assert res.rounds_completed == 40 and res.rounds_elapsed == 40
    assert res.node_lifetime is None and res.network_lifetime is None


def test_pairwise_static_same_energy_use():
    p = fixed_profile([[[40, 40], [50, 40], [60, 45]]] * 30)
    logs = {}
    for pol in Policy:
        rows = []
        run_simulation(cfg_for(p, policy=pol, run_seed=3), p, energy_log=lambda r, t, e: rows.append(e.copy()))
        logs[pol] = np.array(rows)
    # same tree and same leader (same seed): identical trajectories
    assert np.array_equal(logs[Policy.MAX_STABILITY], logs[Policy.MST_DG])


def test_mst_dg_rediscovers_when_edge_stretches():
    base = [[0, 0], [10, 0], [20, 0]]
    moved = [[0, 0], [10, 0], [-16, 5]]
    p = fixed_profile([base] * 4 + [moved] * 6, static=False)
    res, ep = epochs_of(cfg_for(p, energy=INF, policy=Policy.MST_DG), p)
    assert [(a, b) for a, b, _ in ep] == [(0, 3), (4, 9)]
    assert res.discovery_count == 2
    # edges 0-1 and 0-2 survive all ten rounds, so the look-ahead needs one tree
    trace = []
    res = run_simulation(cfg_for(p, energy=INF, policy=Policy.MAX_STABILITY), p, trace=trace)
    (only,) = trace[0].epochs
    assert (only.epoch_start, only.epoch_end) == (0, 9)
    assert only.edge_set() == {(0, 1), (0, 2)}
    assert res.rounds_completed == 10


def test_failure_restarts_epoch_over_survivors():
    # compact cluster far from the sink: the leader drains first
    pts = [[40, 40], [45, 40], [40, 45], [45, 45], [42, 48]]
    p = fixed_profile([pts] * 60)
    energy = EnergyConfig(initial_energy=0.05)
    for pol in Policy:
        res, ep = epochs_of(cfg_for(p, energy=energy, policy=pol, run_seed=1), p)
        assert res.failure_count >= 1
        k = int(round(res.node_lifetime / 0.25)) - 1
        first_dead = res.failed_nodes[0]
        assert ep[0][0] == 0 and ep[0][1] == k - 1
        assert ep[1][0] == k
        assert first_dead not in ep[1][2]
        assert len(ep[1][2]) == 5 - sum(1 for t in res.failure_times if t <= res.node_lifetime)


def test_three_node_line_network_lifetime():
    # node 1 is the only bridge; the run stops exactly when it dies while
    # both ends are still alive, otherwise the survivors stay connected
    p = fixed_profile([[[30, 40], [50, 40], [70, 40]]] * 200)
    stopped = 0
    for seed in range(6):
        res = run_simulation(cfg_for(p, energy=EnergyConfig(initial_energy=0.05), run_seed=seed), p)
        assert lifetime_violations(res, p.positions, 25.0) == []
        first = res.failed_nodes[0]
        if first == 1:
            stopped += 1
            assert res.network_lifetime == res.node_lifetime
            assert res.rounds_elapsed == int(round(res.network_lifetime / 0.25))
            assert res.failed_nodes == [1]
        else:
            assert res.network_lifetime is None
    assert stopped > 0


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("policy", list(Policy))
def test_invariants_energy_constrained(seed, policy):
    p = random_profile(seed, n=15, rounds=400, v=3.0, static=5)
    cfg = SimConfig(field=p.field, mobility=p.mobility, energy=EnergyConfig(initial_energy=0.3),
                    tx_range=40.0, policy=policy, run_seed=seed)
    rows, trace = [], []
    res = run_simulation(cfg, p, trace=trace, energy_log=lambda r, t, e: rows.append(e.copy()))
    assert res.failure_count > 0
    assert run_violations(res, np.array(rows), trace[0].epochs, p.positions, 40.0) == []


def test_discovery_charged_once_per_discovery(monkeypatch):
    calls = []
    real = engine.discovery_charges

    def counting(*a, **kw):
        calls.append(1)
        return real(*a, **kw)

    monkeypatch.setattr(engine, "discovery_charges", counting)
    p = random_profile(3, n=12, rounds=300, v=10.0)
    for pol in Policy:
        calls.clear()
        cfg = SimConfig(field=p.field, mobility=p.mobility, energy=EnergyConfig(initial_energy=0.2),
                        tx_range=40.0, policy=pol)
        res = run_simulation(cfg, p)
        assert len(calls) == res.discovery_count


@pytest.mark.parametrize("seed", range(5))
def test_sufficient_energy_tiles_and_dominates(seed):
    p = random_profile(seed, n=10, rounds=200, v=10.0)
    cfg = SimConfig(field=p.field, mobility=p.mobility, energy=INF, tx_range=30.0, run_seed=seed)
    trace = []
    res = run_simulation(cfg, p, trace=trace)
    assert res.failure_count == 0 and res.rounds_elapsed == 200
    spans = [(t.epoch_start, t.epoch_end) for t in trace[0].epochs]
    assert all(b >= a for a, b in spans)
    assert sum(b - a + 1 for a, b in spans) + res.no_tree_rounds == 200
    a, b = run_pairwise(cfg, p)
    assert a.discovery_count == res.discovery_count
    assert a.discovery_count <= b.discovery_count


def test_same_inputs_same_result(tmp_path):
    p = random_profile(5, n=12, rounds=300)
    cfg = SimConfig(field=p.field, mobility=p.mobility, energy=EnergyConfig(initial_energy=0.3), tx_range=40.0)
    a, b = run_simulation(cfg, p), run_simulation(cfg, p)
    assert asdict(a) == asdict(b)
    pa = write_results_csv([a], tmp_path / "a.csv")
    pb = write_results_csv([b], tmp_path / "b.csv")
    assert pa.read_bytes() == pb.read_bytes()


SMALL = ExperimentGrid(tx_ranges=(25.0, 40.0), v_maxes=(3.0, 10.0), static_counts=(0, 5),
                       profiles_per_cell=2, node_count=12, horizon_s=30.0,
                       energy=EnergyConfig(initial_energy=0.2))


def test_default_grid_cells():
    # 2 ranges x 3 velocities x 4 static counts
    cells = ExperimentGrid().cells()
    assert len(cells) == 24 and len(set(cells)) == 24
    assert ExperimentGrid().horizon_rounds == 24000


def test_one_cell_one_profile():
    grid = replace(SMALL, profiles_per_cell=1)
    out = run_grid(grid, cells=[(25.0, 3.0, 0)])
    assert len(out) == 1
    assert len(out[0].max_stability) == len(out[0].mst_dg) == 1
    assert out[0].max_stability[0].labels["profile"] == 0


def test_cell_order_independence():
    cells = SMALL.cells()
    full = run_grid(SMALL)
    shuffled = run_grid(SMALL, cells=list(reversed(cells)))
    single = run_grid(SMALL, cells=[cells[5]])
    assert [o.cell for o in full] == [o.cell for o in shuffled] == sorted(cells)
    for a, b in zip(full, shuffled):
        assert [asdict(r) for r in a.max_stability + a.mst_dg] == [asdict(r) for r in b.max_stability + b.mst_dg]
    by_cell = {o.cell: o for o in full}
    assert [asdict(r) for r in single[0].mst_dg] == [asdict(r) for r in by_cell[cells[5]].mst_dg]


def test_profiles_shared_across_ranges():
    g = SMALL
    assert g.profile_seed(3.0, 0, 1) == g.profile_seed(3, 0, 1)
    assert g.run_seed(Cell(25.0, 3.0, 0), 1) != g.run_seed(Cell(40.0, 3.0, 0), 1)
    assert g.profile_seed(3.0, 0, 1) != g.profile_seed(3.0, 0, 2)
