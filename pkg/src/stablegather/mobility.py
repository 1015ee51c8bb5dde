"""Random Waypoint mobility profiles sampled once per data-gathering round.

A profile is the replayable input of an experiment: the position of every
node at every round of the horizon.  Each node draws its initial location
and its waypoint legs from its own seeded stream, so a node's trajectory
does not depend on how many other nodes are simulated.
"""

import io
import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import _kernels, _rng
from .errors import ConfigError, ProfileFormatError, ProfileValidationError

FORMAT_VERSION = 1
BINARY_MAGIC = b"MWSNPRF1"
SPEED_TOLERANCE = 1e-9


@dataclass(frozen=True)
class FieldConfig:
    width: float = 100.0
    height: float = 100.0
    sink: tuple = (50.0, 300.0)

    def __post_init__(self):
        object.__setattr__(self, "sink", tuple(float(c) for c in self.sink))
        for name in ("width", "height"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(name, f"must be a positive finite number, got {value!r}")
        if len(self.sink) != 2 or not all(math.isfinite(c) for c in self.sink):
            raise ConfigError("sink", f"must be a finite 2-d point, got {self.sink!r}")


@dataclass(frozen=True)
class MobilityConfig:
    node_count: int = 100
    static_count: int = 0
    v_max: float = 3.0
    round_period: float = 0.25
    horizon_rounds: int = 24000
    seed: int = 0

    def __post_init__(self):
        for name in ("node_count", "static_count", "horizon_rounds"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(name, f"must be an integer, got {value!r}")
        if self.node_count < 0:
            raise ConfigError("node_count", f"must be >= 0, got {self.node_count}")
        if not 0 <= self.static_count <= self.node_count:
            raise ConfigError(
                "static_count",
                f"must lie in [0, node_count={self.node_count}], got {self.static_count}",
            )
        for name in ("v_max", "round_period"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(name, f"must be a positive finite number, got {value!r}")
        if self.horizon_rounds < 1:
            raise ConfigError("horizon_rounds", f"must be >= 1, got {self.horizon_rounds}")
        try:
            _rng.check_seed(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError("seed", str(exc)) from None

    @property
    def max_step(self) -> float:
        """Largest admissible displacement between consecutive rounds."""
        return self.v_max * self.round_period


@dataclass(frozen=True, eq=False)
class MobilityProfile:
    """Positions of all nodes at every round; ``positions[round, node]``.

    Immutable: the position array is made read-only on construction.
    """

    field: FieldConfig
    mobility: MobilityConfig
    positions: np.ndarray
    static_nodes: frozenset = frozenset()

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64, order="C")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "static_nodes", frozenset(int(n) for n in self.static_nodes))

    @property
    def horizon_rounds(self) -> int:
        return self.positions.shape[0]

    @property
    def node_count(self) -> int:
        return self.positions.shape[1]

    def position_at(self, node, round_index):
        return position_at(self, node, round_index)

    def __eq__(self, other):
        if not isinstance(other, MobilityProfile):
            return NotImplemented
        return (
            self.field == other.field
            and self.mobility == other.mobility
            and self.static_nodes == other.static_nodes
            and self.positions.shape == other.positions.shape
            and bool(np.array_equal(self.positions, other.positions))
        )

    __hash__ = None


def walk(start, waypoints, round_period: float, n_rounds: int) -> np.ndarray:
    """Sampled positions of one walker following explicit (x, y, speed) legs.

    Row ``r`` of the result is the position after ``r`` round periods.  There
    is no pause at waypoints; leftover time within a round carries over to
    the next leg.
    """
    legs = np.ascontiguousarray(waypoints, dtype=np.float64).reshape(-1, 3)
    if np.any(legs[:, 2] <= 0):
        raise ValueError("waypoint speeds must be positive")
    out = np.empty((n_rounds, 2))
    if _kernels.walk(float(start[0]), float(start[1]), legs, float(round_period), out) < 0:
        raise ValueError(f"{len(legs)} waypoint legs do not cover {n_rounds} rounds")
    return out


def _draw_legs(gen, count, fld, v_max):
    u = gen.random((count, 3))
    legs = np.empty_like(u)
    legs[:, 0] = u[:, 0] * fld.width
    legs[:, 1] = u[:, 1] * fld.height
    # uniform on (0, v_max]: a zero speed would never reach its waypoint
    legs[:, 2] = v_max * (1.0 - u[:, 2])
    return legs


def _node_trajectory(fld, mob, node, out):
    gen = _rng.stream(mob.seed, "placement", node)
    x0, y0 = gen.random(2) * (fld.width, fld.height)
    # Legs come from the same stream right after the placement draw; when the
    # first batch runs out, more are appended from where the stream left off,
    # so the trajectory does not depend on the batch size.
    expected = mob.horizon_rounds * mob.round_period * mob.v_max / (0.5 * (fld.width + fld.height))
    legs = _draw_legs(gen, int(4 * expected) + 16, fld, mob.v_max)
    while _kernels.walk(x0, y0, legs, mob.round_period, out) < 0:
        legs = np.concatenate([legs, _draw_legs(gen, len(legs), fld, mob.v_max)])


def generate_profile(fld: FieldConfig, mob: MobilityConfig) -> MobilityProfile:
    """Seeded Random Waypoint profile over ``mob.horizon_rounds`` rounds.

    Node ``n`` is placed uniformly in the field from stream ("placement", n).
    The static subset is the first ``static_count`` ids of a seeded shuffle;
    static nodes keep their initial position for the whole horizon.
    """
    if not isinstance(fld, FieldConfig):
        raise ConfigError("field", f"expected FieldConfig, got {type(fld).__name__}")
    if not isinstance(mob, MobilityConfig):
        raise ConfigError("mobility", f"expected MobilityConfig, got {type(mob).__name__}")
    n, horizon = mob.node_count, mob.horizon_rounds
    order = _rng.stream(mob.seed, "static").permutation(n)
    static = frozenset(int(v) for v in order[: mob.static_count])

    positions = np.empty((horizon, n, 2))
    track = np.empty((horizon, 2))
    for node in range(n):
        if node in static:
            gen = _rng.stream(mob.seed, "placement", node)
            positions[:, node, :] = gen.random(2) * (fld.width, fld.height)
        else:
            _node_trajectory(fld, mob, node, track)
            positions[:, node, :] = track
    return MobilityProfile(fld, mob, positions, static)


def position_at(profile: MobilityProfile, node: int, round_index: int) -> tuple:
    if not 0 <= round_index < profile.horizon_rounds:
        raise IndexError(f"round {round_index} outside [0, {profile.horizon_rounds})")
    if not 0 <= node < profile.node_count:
        raise IndexError(f"node {node} outside [0, {profile.node_count})")
    x, y = profile.positions[round_index, node]
    return (float(x), float(y))


def validate_profile(profile: MobilityProfile) -> None:
    """Re-check containment, speed bound and static-node invariants.

    Raises ProfileValidationError describing the first violation found.
    """
    fld, mob, pos = profile.field, profile.mobility, profile.positions
    if pos.shape != (mob.horizon_rounds, mob.node_count, 2):
        raise ProfileValidationError(
            f"positions shape {pos.shape} does not match "
            f"({mob.horizon_rounds}, {mob.node_count}, 2)"
        )
    if not np.all(np.isfinite(pos)):
        raise ProfileValidationError("positions contain non-finite values")
    outside = (pos[..., 0] < 0) | (pos[..., 0] > fld.width) | (pos[..., 1] < 0) | (pos[..., 1] > fld.height)
    if outside.any():
        r, node = map(int, np.argwhere(outside)[0])
        raise ProfileValidationError(f"node {node} leaves the field at round {r}")
    if len(pos) > 1:
        step = np.hypot(*np.moveaxis(np.diff(pos, axis=0), -1, 0))
        limit = mob.max_step + SPEED_TOLERANCE
        if (step > limit).any():
            r, node = map(int, np.argwhere(step > limit)[0])
            raise ProfileValidationError(
                f"node {node} moves {step[r, node]:.9g} m between rounds {r} and {r + 1}; "
                f"bound is {mob.max_step:.9g} m"
            )
    if len(profile.static_nodes) != mob.static_count:
        raise ProfileValidationError(
            f"{len(profile.static_nodes)} static nodes recorded, config says {mob.static_count}"
        )
    for node in sorted(profile.static_nodes):
        if not 0 <= node < mob.node_count:
            raise ProfileValidationError(f"static node id {node} out of range")
        if not np.all(pos[:, node] == pos[0, node]):
            raise ProfileValidationError(f"static node {node} moves")


# -- serialization ---------------------------------------------------------
#
# Binary form (default, suffix other than .json):
#   8 bytes   magic b"MWSNPRF1"
#   4 bytes   little-endian uint32 header length H
#   H bytes   UTF-8 JSON header {format_version, field, mobility, static_nodes}
#   T*N*2     little-endian IEEE-754 float64 positions, round-major
# JSON form (.json suffix): the header object plus "positions" as nested
# [round][node][x, y] lists; floats are written with repr so they round-trip.


def _header(profile):
    return {
        "format_version": FORMAT_VERSION,
        "field": asdict(profile.field),
        "mobility": asdict(profile.mobility),
        "static_nodes": sorted(profile.static_nodes),
    }


def _is_json(path, fmt):
    if fmt is not None:
        if fmt not in ("json", "binary"):
            raise ValueError(f"unknown profile format {fmt!r}")
        return fmt == "json"
    return Path(path).suffix.lower() == ".json"


def save_profile(profile: MobilityProfile, path, fmt=None) -> Path:
    path = Path(path)
    header = _header(profile)
    if _is_json(path, fmt):
        header["positions"] = profile.positions.tolist()
        path.write_text(json.dumps(header, separators=(",", ":")) + "\n", encoding="utf-8")
    else:
        raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(profile.positions.astype("<f8", copy=False).tobytes())
    return path


def _from_header(header, positions, where):
    try:
        if header.get("format_version") != FORMAT_VERSION:
            raise ProfileFormatError(
                f"unsupported format_version {header.get('format_version')!r}", **where
            )
        fld_raw = dict(header["field"])
        fld_raw["sink"] = tuple(fld_raw["sink"])
        fld = FieldConfig(**fld_raw)
        mob = MobilityConfig(**header["mobility"])
        static = header["static_nodes"]
    except (KeyError, TypeError, ConfigError) as exc:
        raise ProfileFormatError(f"malformed header: {exc}", **where) from None
    profile = MobilityProfile(fld, mob, positions, static)
    validate_profile(profile)
    return profile


def load_profile(path, fmt=None) -> MobilityProfile:
    """Load and validate a profile written by :func:`save_profile`."""
    path = Path(path)
    if _is_json(path, fmt):
        text = path.read_text(encoding="utf-8")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProfileFormatError(exc.msg, line=exc.lineno, column=exc.colno, offset=exc.pos) from None
        if not isinstance(doc, dict) or "positions" not in doc:
            raise ProfileFormatError("missing 'positions'", line=1, column=1, offset=0)
        try:
            positions = np.array(doc["positions"], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ProfileFormatError(f"bad positions: {exc}", line=1, column=1, offset=0) from None
        try:
            mob = doc["mobility"]
            shape = (int(mob["horizon_rounds"]), int(mob["node_count"]), 2)
        except (KeyError, TypeError, ValueError):
            raise ProfileFormatError("header lacks mobility.horizon_rounds/node_count", line=1, column=1, offset=0) from None
        if positions.size == 0 and shape[0] * shape[1] == 0:
            positions = positions.reshape(shape)
        elif positions.shape != shape:
            raise ProfileFormatError(
                f"positions shape {positions.shape} does not match header {shape}", line=1, column=1, offset=0
            )
        return _from_header(doc, positions, {"line": 1, "column": 1, "offset": 0})

    data = path.read_bytes()
    buf = io.BytesIO(data)
    magic = buf.read(len(BINARY_MAGIC))
    if magic != BINARY_MAGIC:
        raise ProfileFormatError("bad magic, not a profile file", offset=0)
    size_raw = buf.read(4)
    if len(size_raw) != 4:
        raise ProfileFormatError("truncated header length", offset=len(BINARY_MAGIC))
    (size,) = struct.unpack("<I", size_raw)
    start = buf.tell()
    raw = buf.read(size)
    if len(raw) != size:
        raise ProfileFormatError(f"truncated header: expected {size} bytes, got {len(raw)}", offset=start)
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProfileFormatError(f"header is not valid JSON: {exc}", offset=start) from None
    if not isinstance(header, dict):
        raise ProfileFormatError("header is not a JSON object", offset=start)
    body = buf.tell()
    try:
        t, n = int(header["mobility"]["horizon_rounds"]), int(header["mobility"]["node_count"])
    except (KeyError, TypeError, ValueError):
        raise ProfileFormatError("header lacks mobility.horizon_rounds/node_count", offset=start) from None
    need = t * n * 2 * 8
    payload = data[body:]
    if len(payload) != need:
        raise ProfileFormatError(
            f"position block is {len(payload)} bytes, expected {need}", offset=body + min(len(payload), need)
        )
    positions = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(t, n, 2)
    return _from_header(header, positions, {"offset": start})
