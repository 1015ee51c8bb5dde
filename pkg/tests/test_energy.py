import math

import numpy as np
import pytest

from stablegather.energy import (
    EnergyConfig,
    EnergyLedger,
    charge_discovery,
    charge_gathering_round,
    discovery_charges,
    gathering_charges,
    rx_energy,
    tx_energy,
)
from stablegather.errors import ConfigError
from stablegather.topology import SpanningTree, bfs_root

CFG = EnergyConfig()
SINK = (50.0, 300.0)


def test_radio_constants():
    assert tx_energy(CFG, 2000, 25) == pytest.approx(2.25e-4, abs=1e-12)
    assert tx_energy(CFG, 400, 40) == pytest.approx(8.4e-5, abs=1e-12)
    assert tx_energy(CFG, 0, 25) == 0.0
    assert rx_energy(CFG, 2000) == pytest.approx(1.0e-4, abs=1e-12)
    assert rx_energy(CFG, 400) == pytest.approx(2.0e-5, abs=1e-12)
    assert rx_energy(CFG, 0) == 0.0


@pytest.mark.parametrize("name", ["e_elec", "eps_amp", "initial_energy", "data_packet_bits"])
def test_config_rejects_nonpositive(name):
    with pytest.raises(ConfigError) as err:
        EnergyConfig(**{name: 0})
    assert err.value.field == name


def test_two_node_round():
    # leader at (50, 50) is 250 m below the sink; leaf 10 m to its left
    pos = np.array([[50.0, 50.0], [40.0, 50.0]])
    tree = bfs_root(SpanningTree((0, 1), ((0, 1),), 10.0), 0)
    out = gathering_charges(tree, pos, CFG, SINK, 2)
    # leaf: 50e-9*2000 + 100e-12*2000*100
    assert out[1] == pytest.approx(1.2e-4, abs=1e-12)
    # leader: rx 1e-4 + tx 1e-4 + 100e-12*2000*62500
    assert out[0] == pytest.approx(1.0e-4 + 1.26e-2, abs=1e-12)


def test_single_node_tree_pays_sink_only():
    pos = np.array([[50.0, 50.0]])
    tree = bfs_root(SpanningTree((0,), (), 0.0), 0)
    out = gathering_charges(tree, pos, CFG, SINK, 1)
    assert out[0] == pytest.approx(tx_energy(CFG, 2000, 250.0), abs=1e-15)


def test_round_charges_match_hand_sum():
    rng = np.random.default_rng(5)
    pos = rng.random((6, 2)) * 30
    tree = bfs_root(SpanningTree(tuple(range(6)), ((0, 1), (0, 2), (1, 3), (1, 4), (4, 5)), 0.0), 1)
    out = gathering_charges(tree, pos, CFG, SINK, 8)
    want = np.zeros(8)
    for child, parent in tree.parent.items():
        want[child] += 50e-9 * 2000 + 100e-12 * 2000 * math.dist(pos[child], pos[parent]) ** 2
        want[parent] += 50e-9 * 2000
    want[1] += 50e-9 * 2000 + 100e-12 * 2000 * math.dist(pos[1], SINK) ** 2
    assert np.allclose(out, want, rtol=0, atol=1e-15)
    assert out[6] == out[7] == 0.0


def test_discovery_isolated_node():
    pos = {3: (0.0, 0.0), 4: (90.0, 90.0)}
    out = discovery_charges({3, 4}, pos, CFG, 25.0, 5)
    assert out[3] == pytest.approx(50e-9 * 400 + 100e-12 * 400 * 625, abs=1e-15)
    assert out[0] == 0.0


def test_discovery_five_neighbours():
    pos = {0: (50.0, 50.0)}
    for k in range(5):
        a = 2 * math.pi * k / 5
        pos[k + 1] = (50 + 10 * math.cos(a), 50 + 10 * math.sin(a))
    out = discovery_charges(pos.keys(), pos, CFG, 25.0, 6)
    assert out[0] == pytest.approx(1.45e-4, abs=1e-12)


def test_discovery_counts_only_live_neighbours():
    pos = np.array([[0.0, 0.0], [5.0, 0.0], [10.0, 0.0]])
    out = discovery_charges({0, 2}, pos, CFG, 25.0, 3)
    assert out[1] == 0.0
    assert out[0] == pytest.approx(tx_energy(CFG, 400, 25.0) + rx_energy(CFG, 400), abs=1e-15)


def test_ledger_overdraft_and_failure_time():
    led = EnergyLedger(3, 1.0)
    assert led.charge([0.4, 0.0, 1.5], 0.25) == {2}
    assert led.residual.tolist() == [0.6, 1.0, 0.0]
    assert led.failure_time == {2: 0.25}
    assert led.charge([0.6, 0.0, 0.3], 0.5) == {0}
    assert led.failure_time == {2: 0.25, 0: 0.5}
    assert led.live_nodes() == frozenset({1})
    assert led.live_mask().tolist() == [False, True, False]
    assert led.consumed() == pytest.approx(2.0)


def test_ledger_infinite_energy_never_fails():
    led = EnergyLedger(2, math.inf)
    for _ in range(100):
        assert led.charge([1e3, 1e3], 1.0) == set()
    assert led.consumed() == pytest.approx(2e5)


def test_charge_helpers_return_failures():
    pos = np.array([[50.0, 50.0], [40.0, 50.0]])
    tree = bfs_root(SpanningTree((0, 1), ((0, 1),), 10.0), 0)
    led = EnergyLedger(2, 0.005)
    assert charge_gathering_round(led, tree, pos, CFG, SINK, 1.0) == {0}
    led = EnergyLedger(2, 1e-5)
    assert charge_discovery(led, {0, 1}, pos, CFG, 25.0, 2.0) == {0, 1}


def test_energy_conservation_over_rounds():
    rng = np.random.default_rng(9)
    pos = rng.random((10, 2)) * 40
    edges = tuple((k, k + 1) for k in range(9))
    tree = bfs_root(SpanningTree(tuple(range(10)), edges, 0.0), 4)
    led = EnergyLedger(10, 2.0)
    total = 0.0
    for r in range(50):
        amounts = gathering_charges(tree, pos, CFG, SINK, 10)
        total += amounts.sum()
        led.charge(amounts, r)
    assert led.consumed() == pytest.approx(total, rel=1e-12)
    # every received packet was sent by a tree child: rx total = 9 packets per round
    assert np.isclose(sum(len(v) for v in tree.children.values()), 9)
