"""Command line entry point: gen-profiles, run, grid, report.

Every flag can also come from ``--config FILE``, a JSON object whose keys
are flag names (``tx-range`` or ``tx_range``); explicit flags win.
Failures print one JSON line ``{"error": ..., "message": ...}`` on stderr
and exit non-zero.
"""

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

from .energy import EnergyConfig
from .engine import DEFAULT_HORIZON_S, ExperimentGrid, SimConfig, run_grid, run_simulation
from .errors import ConfigError
from .gatherers import Policy
from .metrics import common_timeline
from .mobility import FieldConfig, MobilityConfig, generate_profile, load_profile, save_profile
from .reports import (
    energy_logger,
    format_trace,
    group_by_cell,
    read_results_csv,
    read_results_json,
    write_energy_header,
    write_results_csv,
    write_results_json,
    write_summary_csv,
    write_summary_json,
)

POLICIES = ("max-stability", "mst-dg", "both")


LIST_FLAGS = ("tx_range", "vmax", "static_nodes")
PATH_FLAGS = ("out", "profile", "results")


def _common(p, sweep=True):
    # single-run commands take the first value of each list flag
    p.add_argument("--config", type=Path, help="JSON file with flag values")
    p.add_argument("--tx-range", type=float, nargs="+", default=[25.0, 40.0] if sweep else [25.0])
    p.add_argument("--vmax", type=float, nargs="+", default=[3.0, 10.0, 20.0] if sweep else [3.0])
    p.add_argument("--static-nodes", type=int, nargs="+", default=[0, 20, 50, 80] if sweep else [0])
    p.add_argument("--nodes", type=int, default=100, help="node count (default 100)")
    p.add_argument("--profiles", type=int, default=20, help="profiles per cell (default 20)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon-s", type=float, default=DEFAULT_HORIZON_S)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--sufficient-energy", action="store_true", help="infinite batteries: no node ever fails")


def build_parser():
    parser = argparse.ArgumentParser(prog="stablegather", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-profiles", help="write Random Waypoint profile files")
    _common(p)
    p.add_argument("--profile-format", choices=("binary", "json"), default="binary")

    p = sub.add_parser("run", help="simulate one configuration on one profile")
    _common(p, sweep=False)
    p.add_argument("--profile", type=Path, help="profile file (default: generate from --vmax/--static-nodes/--seed)")
    p.add_argument("--policy", choices=POLICIES, default="both")
    p.add_argument("--trace", action="store_true", help="also write trace.txt (one line per epoch)")
    p.add_argument("--energy-csv", action="store_true", help="also write energy-<policy>.csv (per round and node)")

    p = sub.add_parser("grid", help="sweep tx range x vmax x static nodes, both policies")
    _common(p)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("report", help="summarise stored results, incl. common-timeline coverage")
    p.add_argument("--config", type=Path)
    p.add_argument("--results", type=Path, required=True, help="results.csv/.json or a grid output directory")
    p.add_argument("--out", type=Path, default=None, help="directory for summary files (default: alongside results)")
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    try:
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", str(exc)) from None
    if not isinstance(overrides, dict):
        raise ConfigError("config", "must contain a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    defaults = {}
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("help", "config"):
            raise ConfigError(key, f"not a flag of '{args.command}'")
        if dest in LIST_FLAGS and not isinstance(value, list):
            value = [value]
        defaults[dest] = Path(value) if dest in PATH_FLAGS else value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _energy(args):
    return EnergyConfig(initial_energy=math.inf) if args.sufficient_energy else EnergyConfig()


def _grid(args):
    return ExperimentGrid(
        tx_ranges=tuple(args.tx_range),
        v_maxes=tuple(args.vmax),
        static_counts=tuple(args.static_nodes),
        profiles_per_cell=args.profiles,
        base_seed=args.seed,
        node_count=args.nodes,
        horizon_s=args.horizon_s,
        energy=_energy(args),
    )


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _write_results(results, out, fmt):
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        return write_results_json(results, out / "results.json")
    return write_results_csv(results, out / "results.csv")


def cmd_gen_profiles(args):
    grid = _grid(args)
    args.out.mkdir(parents=True, exist_ok=True)
    suffix = ".json" if args.profile_format == "json" else ".bin"
    written = 0
    for v in grid.v_maxes:
        for s in grid.static_counts:
            for i in range(grid.profiles_per_cell):
                profile = generate_profile(grid.field, grid.mobility(v, s, i))
                save_profile(profile, args.out / f"profile_v{v:g}_s{s}_{i:03d}{suffix}", args.profile_format)
                written += 1
    print(f"wrote {written} profiles to {args.out}")


def cmd_run(args):
    fld = FieldConfig()
    if args.profile is not None:
        profile = load_profile(args.profile)
        fld = profile.field
        mob = replace(profile.mobility, horizon_rounds=min(
            profile.horizon_rounds, max(1, int(round(args.horizon_s / profile.mobility.round_period)))))
    else:
        mob = MobilityConfig(
            node_count=args.nodes,
            static_count=args.static_nodes[0],
            v_max=args.vmax[0],
            horizon_rounds=max(1, int(round(args.horizon_s / 0.25))),
            seed=args.seed,
        )
        profile = generate_profile(fld, mob)
    policies = [Policy.MAX_STABILITY, Policy.MST_DG] if args.policy == "both" else [Policy(args.policy)]
    args.out.mkdir(parents=True, exist_ok=True)
    results, traces = [], []
    for pol in policies:
        cfg = SimConfig(field=fld, mobility=mob, energy=_energy(args), tx_range=args.tx_range[0],
                        policy=pol, run_seed=args.seed)
        if args.energy_csv:
            with open(args.out / f"energy-{pol.value}.csv", "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                write_energy_header(writer)
                res = run_simulation(cfg, profile, trace=traces, energy_log=energy_logger(writer))
        else:
            res = run_simulation(cfg, profile, trace=traces)
        res.labels = {"tx_range": cfg.tx_range, "v_max": mob.v_max, "static_count": mob.static_count,
                      "profile": 0, "run_seed": cfg.run_seed}
        results.append(res)
    path = _write_results(results, args.out, args.format)
    if args.trace:
        (args.out / "trace.txt").write_text("".join(format_trace(s) for s in traces), encoding="utf-8")
    for r in results:
        print(f"{r.policy}: node_lifetime={r.node_lifetime} network_lifetime={r.network_lifetime} "
              f"discoveries={r.discovery_count} failures={r.failure_count}")
    print(f"results: {path}")


def cmd_grid(args):
    grid = _grid(args)
    started = time.time()

    def progress(done):
        for o in done:
            print(f"[{time.time() - started:7.1f}s] {o.cell.key} done", file=sys.stderr, flush=True)

    outcomes = run_grid(grid, workers=args.workers, progress=progress)
    results = [r for o in outcomes for r in (*o.max_stability, *o.mst_dg)]
    path = _write_results(results, args.out, args.format)
    meta = _jsonable({"grid": asdict(grid)})
    write_summary_json(outcomes, args.out / "summary.json", meta)
    write_summary_csv(outcomes, args.out / "summary.csv")
    print(f"{len(outcomes)} cells, {len(results)} runs -> {path}")


def _load_results(path):
    path = Path(path)
    if path.is_dir():
        path = path / "results.csv" if (path / "results.csv").exists() else path / "results.json"
    if path.suffix == ".json":
        return path, read_results_json(path)
    return path, read_results_csv(path)


def cmd_report(args):
    path, results = _load_results(args.results)
    outcomes = group_by_cell(results)
    out = args.out or path.parent
    out.mkdir(parents=True, exist_ok=True)
    write_summary_json(outcomes, out / "summary.json", {"source": str(path)})
    write_summary_csv(outcomes, out / "summary.csv")
    print("cell                  policy          node_lt  network_lt  discoveries  cov@common")
    for o in outcomes:
        a, b = o.summaries()
        common = common_timeline(o.max_stability, o.mst_dg)
        for name, s in (("max-stability", a), ("mst-dg", b)):
            cov = f"{common[name]['mean_fraction']:.3f}" if common else "NA"
            node_lt = f"{s.mean_node_lifetime:.1f}" if s.mean_node_lifetime is not None else "NA"
            net_lt = f"{s.mean_network_lifetime:.1f}" if s.mean_network_lifetime is not None else "NA"
            print(f"{o.cell.key:<21} {name:<14} {node_lt:>8} {net_lt:>11} {s.mean_discovery_count:>12.1f} {cov:>11}")


COMMANDS = {"gen-profiles": cmd_gen_profiles, "run": cmd_run, "grid": cmd_grid, "report": cmd_report}


def main(argv=None):
    try:
        args = _parse(argv)
        COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConfigError):
            err["field"] = exc.field
        print(json.dumps(err), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
