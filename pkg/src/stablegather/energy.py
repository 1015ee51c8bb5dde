"""First-order radio energy accounting.

Transmitting k bits over d metres costs ``e_elec*k + eps_amp*k*d**2``;
receiving k bits costs ``e_elec*k``.  The ledger owns residual energies and
records the time at which each node first runs dry.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError
from .topology import DGTree, node_coords


@dataclass(frozen=True)
class EnergyConfig:
    e_elec: float = 50e-9          # J/bit
    eps_amp: float = 100e-12       # J/bit/m^2
    initial_energy: float = 2.0    # J per node; math.inf disables failures
    data_packet_bits: int = 2000
    control_packet_bits: int = 400

    def __post_init__(self):
        for name in ("e_elec", "eps_amp", "initial_energy", "data_packet_bits", "control_packet_bits"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or math.isnan(value) or value <= 0:
                raise ConfigError(name, f"must be strictly positive, got {value!r}")

    @property
    def sufficient(self) -> bool:
        return math.isinf(self.initial_energy)


def tx_energy(cfg: EnergyConfig, k, d):
    return cfg.e_elec * k + cfg.eps_amp * k * d * d


def rx_energy(cfg: EnergyConfig, k):
    return cfg.e_elec * k


class EnergyLedger:
    """Residual energy per node id.

    Charges may overdraw a node within the round it is taking part in; the
    residual is then clamped at zero and the node is recorded as failed at
    the time passed with the charge.
    """

    def __init__(self, node_count: int, initial_energy: float):
        self.initial_energy = float(initial_energy)
        self.residual = np.full(node_count, self.initial_energy)
        self.failure_time = {}
        self._dead = np.zeros(node_count, dtype=bool)
        self.charged = 0.0

    @property
    def node_count(self):
        return len(self.residual)

    def live_mask(self) -> np.ndarray:
        return self.residual > 0

    def live_nodes(self) -> frozenset:
        return frozenset(int(n) for n in np.flatnonzero(self.residual > 0))

    def charge(self, amounts, time_s: float) -> set:
        """Subtract a per-node charge vector; return ids that just failed."""
        amounts = np.asarray(amounts, dtype=np.float64)
        self.charged += float(amounts.sum())
        self.residual -= amounts
        newly = np.flatnonzero((self.residual <= 0) & ~self._dead)
        if len(newly):
            self._dead[newly] = True
            for n in newly:
                self.failure_time[int(n)] = time_s
        np.maximum(self.residual, 0.0, out=self.residual)
        return {int(n) for n in newly}

    def consumed(self) -> float:
        """Energy actually drawn from batteries (overdraft beyond zero excluded)."""
        if math.isinf(self.initial_energy):
            return self.charged
        return float(self.initial_energy * len(self.residual) - self.residual.sum())


def gathering_charges(tree: DGTree, positions, cfg: EnergyConfig, sink, node_count: int) -> np.ndarray:
    """Per-node energy for one aggregation round over ``tree``.

    Each non-leader sends one fixed-size aggregate to its parent, each node
    receives one packet per child, and the leader forwards to the sink.
    """
    members, kids, parents, fan_in = tree.arrays
    bits = cfg.data_packet_bits
    out = np.zeros(node_count)
    if len(kids):
        if isinstance(positions, np.ndarray):
            delta = positions[kids] - positions[parents]
        else:
            delta = node_coords(positions, kids) - node_coords(positions, parents)
        d2 = np.einsum("ij,ij->i", delta, delta)
        out[kids] = cfg.e_elec * bits + cfg.eps_amp * bits * d2
    out[members] += rx_energy(cfg, bits) * fan_in
    lx, ly = positions[tree.leader]
    out[tree.leader] += tx_energy(cfg, bits, math.hypot(lx - sink[0], ly - sink[1]))
    return out


def charge_gathering_round(ledger: EnergyLedger, tree: DGTree, positions, cfg: EnergyConfig, sink, time_s=0.0) -> set:
    return ledger.charge(gathering_charges(tree, positions, cfg, sink, ledger.node_count), time_s)


def discovery_charges(live, positions, cfg: EnergyConfig, tx_range: float, node_count: int) -> np.ndarray:
    """Flooding cost: one control broadcast over the full range per live node,
    plus one reception per live neighbour."""
    nodes = np.array(sorted({int(n) for n in live}), dtype=np.int64)
    out = np.zeros(node_count)
    if len(nodes) == 0:
        return out
    deg = _kernels.degrees(node_coords(positions, nodes), float(tx_range))
    bits = cfg.control_packet_bits
    out[nodes] = tx_energy(cfg, bits, tx_range) + rx_energy(cfg, bits) * deg
    return out


def charge_discovery(ledger: EnergyLedger, live, positions, cfg: EnergyConfig, tx_range: float, time_s=0.0) -> set:
    return ledger.charge(discovery_charges(live, positions, cfg, tx_range, ledger.node_count), time_s)
