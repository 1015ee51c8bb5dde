import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablegather.errors import ConfigError, ProfileFormatError, ProfileValidationError
from stablegather.mobility import (
    BINARY_MAGIC,
    FieldConfig,
    MobilityConfig,
    MobilityProfile,
    generate_profile,
    load_profile,
    position_at,
    save_profile,
    validate_profile,
    walk,
)

FIELD = FieldConfig()


def small(**kw):
    base = dict(node_count=6, static_count=2, v_max=10.0, horizon_rounds=200, seed=7)
    base.update(kw)
    return generate_profile(FIELD, MobilityConfig(**base))


def test_walk_straight_line():
    # 50 m leg at 5 m/s: after 2.5 s the walker has covered 12.5 m
    pos = walk((0.0, 0.0), [(30.0, 40.0, 5.0)], 0.25, 11)
    assert pos[0].tolist() == [0.0, 0.0]
    assert pos[10] == pytest.approx((7.5, 10.0), abs=1e-12)


def test_walk_carries_time_over_waypoints():
    # first leg is 1 m at 2 m/s (0.5 s), the rest of the 1 s goes into the second leg
    pos = walk((0.0, 0.0), [(1.0, 0.0, 2.0), (1.0, 10.0, 4.0)], 1.0, 2)
    assert pos[1] == pytest.approx((1.0, 2.0), abs=1e-12)


def test_walk_runs_out_of_legs():
    with pytest.raises(ValueError):
        walk((0.0, 0.0), [(1.0, 0.0, 1.0)], 1.0, 5)


def test_static_node_placed_once():
    p = small()
    assert len(p.static_nodes) == 2
    for n in p.static_nodes:
        assert np.all(p.positions[:, n] == p.positions[0, n])
        assert position_at(p, n, 150) == position_at(p, n, 0)


def test_same_seed_bit_identical():
    a, b = small(), small()
    assert a == b
    assert a.positions.tobytes() == b.positions.tobytes()
    assert small(seed=8) != a


def test_trajectory_independent_of_node_count():
    a = small(node_count=4, static_count=0)
    b = small(node_count=9, static_count=0)
    assert np.array_equal(a.positions[:, :4], b.positions[:, :4])


def test_position_at_bounds():
    p = small()
    assert position_at(p, 0, 0) == tuple(p.positions[0, 0])
    with pytest.raises(IndexError):
        position_at(p, 0, p.horizon_rounds)
    with pytest.raises(IndexError):
        p.position_at(6, 0)


def test_positions_are_read_only():
    p = small()
    with pytest.raises(ValueError):
        p.positions[0, 0, 0] = 1.0


@pytest.mark.parametrize("kw,name", [
    (dict(static_count=7), "static_count"),
    (dict(v_max=0.0), "v_max"),
    (dict(horizon_rounds=0), "horizon_rounds"),
    (dict(seed=-1), "seed"),
    (dict(node_count=2.5), "node_count"),
])
def test_config_errors_name_the_field(kw, name):
    base = dict(node_count=6, static_count=2)
    base.update(kw)
    with pytest.raises(ConfigError) as err:
        MobilityConfig(**base)
    assert err.value.field == name


def test_field_rejects_bad_sizes():
    with pytest.raises(ConfigError):
        FieldConfig(width=-1)
    with pytest.raises(ConfigError):
        FieldConfig(sink=(0.0, float("nan")))


@pytest.mark.parametrize("suffix", [".bin", ".json"])
def test_save_load_round_trip(tmp_path, suffix):
    p = small()
    path = save_profile(p, tmp_path / f"p{suffix}")
    q = load_profile(path)
    assert q == p
    assert q.static_nodes == p.static_nodes


def test_binary_layout(tmp_path):
    p = small(horizon_rounds=3, node_count=2, static_count=0)
    data = save_profile(p, tmp_path / "p.bin").read_bytes()
    assert data[:8] == BINARY_MAGIC
    (h,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + h])
    assert header["format_version"] == 1
    body = np.frombuffer(data[12 + h:], dtype="<f8").reshape(3, 2, 2)
    assert np.array_equal(body, p.positions)


def test_truncated_binary_is_parse_error(tmp_path):
    path = save_profile(small(), tmp_path / "p.bin")
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(ProfileFormatError) as err:
        load_profile(path)
    assert err.value.offset is not None
    path.write_bytes(data[:10])
    with pytest.raises(ProfileFormatError):
        load_profile(path)


def test_truncated_json_is_parse_error(tmp_path):
    path = save_profile(small(), tmp_path / "p.json")
    path.write_text(path.read_text()[:-40])
    with pytest.raises(ProfileFormatError) as err:
        load_profile(path)
    assert err.value.line == 1


def test_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a profile at all")
    with pytest.raises(ProfileFormatError):
        load_profile(path)


def test_speed_violation_rejected_on_load(tmp_path):
    p = small(static_count=0)
    pos = p.positions.copy()
    # jump of 2.5 m + 1 m in a round where the bound is 10 * 0.25 = 2.5 m
    pos[5, 0] = pos[4, 0] + (3.5, 0.0) if pos[4, 0, 0] < 50 else pos[4, 0] - (3.5, 0.0)
    bad = MobilityProfile(p.field, p.mobility, pos, p.static_nodes)
    with pytest.raises(ProfileValidationError):
        validate_profile(bad)
    path = save_profile(bad, tmp_path / "bad.bin")
    with pytest.raises(ProfileValidationError):
        load_profile(path)


def test_containment_and_static_violations():
    p = small()
    pos = p.positions.copy()
    pos[3, 1] = (-0.5, 10.0)
    with pytest.raises(ProfileValidationError):
        validate_profile(MobilityProfile(p.field, p.mobility, pos, p.static_nodes))
    s = min(p.static_nodes)
    pos = p.positions.copy()
    pos[-1, s] += 0.1
    with pytest.raises(ProfileValidationError):
        validate_profile(MobilityProfile(p.field, p.mobility, pos, p.static_nodes))


def test_bad_header_is_format_error(tmp_path):
    path = save_profile(small(horizon_rounds=2), tmp_path / "p.json")
    doc = json.loads(path.read_text())
    doc["mobility"]["v_max"] = -3
    path.write_text(json.dumps(doc))
    with pytest.raises(ProfileFormatError):
        load_profile(path)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(1, 8),
    static=st.integers(0, 8),
    v=st.floats(0.5, 30.0),
    rounds=st.integers(1, 300),
    seed=st.integers(0, 2**32),
)
def test_generated_profiles_are_valid(n, static, v, rounds, seed):
    mob = MobilityConfig(node_count=n, static_count=min(static, n), v_max=v, horizon_rounds=rounds, seed=seed)
    p = generate_profile(FIELD, mob)
    validate_profile(p)
    assert p.positions.shape == (rounds, n, 2)
    if rounds > 1:
        step = np.hypot(*np.moveaxis(np.diff(p.positions, axis=0), -1, 0))
        assert step.max() <= v * 0.25 + 1e-9
    assert p.positions.min() >= 0 and p.positions.max() <= 100
