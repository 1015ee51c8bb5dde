"""Max-stability vs minimum-distance spanning tree data gathering in mobile sensor networks."""

from .energy import EnergyConfig, EnergyLedger, charge_discovery, charge_gathering_round, rx_energy, tx_energy
from .engine import Cell, ExperimentGrid, SimConfig, run_grid, run_pairwise, run_simulation
from .errors import ConfigError, ProfileFormatError, ProfileValidationError, UsageError
from .gatherers import GathererState, Policy, StaticHorizon, max_stability_find_epoch, tree_valid
from .metrics import BatchSummary, RunResult, aggregate_batch, coverage_fraction, network_lifetime_check
from .mobility import FieldConfig, MobilityConfig, MobilityProfile, generate_profile, load_profile, save_profile
from .topology import DGTree, SpanningTree, bfs_root, build_static_graph, intersect_extend, is_connected, prim_mst

__version__ = "0.1.0"
