"""On-disk result formats.

results.csv (schema 1), one row per profile per metric::

    tx_range,v_max,static_count,profile,run_seed,policy,metric,key,value

``metric`` is one of node_lifetime, network_lifetime, discovery_count,
rounds_completed, no_tree_rounds, rounds_elapsed (empty key),
failure_time / failed_node (key = x, the x-th failure) or coverage_loss_time
(key = target fraction).  Undefined lifetimes are written as ``NA``.
Floats are written with ``repr`` so files are byte-stable.

summary.json (schema 1) holds one BatchSummary per cell and policy plus
the common-timeline coverage comparison; summary.csv flattens the means
for plotting.  results.json is the ``--format json`` alternative to
results.csv and also carries the leader sequence of every run.

trace.txt, one line per epoch::

    <policy> <epoch_start> <epoch_end> <leader> u-v,u-v,...
"""

import csv
import json
from dataclasses import asdict
from pathlib import Path

from .engine import Cell, CellOutcome
from .metrics import RunResult, aggregate_batch, common_timeline

SCHEMA_VERSION = 1
RESULT_COLUMNS = ("tx_range", "v_max", "static_count", "profile", "run_seed", "policy", "metric", "key", "value")
SCALAR_METRICS = ("node_lifetime", "network_lifetime", "discovery_count", "rounds_completed", "no_tree_rounds", "rounds_elapsed")
INT_METRICS = {"discovery_count", "rounds_completed", "no_tree_rounds", "rounds_elapsed"}
NA = "NA"


def _num(v):
    if v is None:
        return NA
    return repr(float(v)) if isinstance(v, float) else str(v)


def _fraction_key(f):
    return f"{f:.2f}"


def result_rows(result: RunResult):
    lab = result.labels
    head = [_num(lab.get("tx_range")), _num(lab.get("v_max")), lab.get("static_count", ""),
            lab.get("profile", ""), lab.get("run_seed", ""), result.policy]
    for m in SCALAR_METRICS:
        yield head + [m, "", _num(getattr(result, m))]
    for x, t in enumerate(result.failure_times, start=1):
        yield head + ["failure_time", x, _num(t)]
    for x, n in enumerate(result.failed_nodes, start=1):
        yield head + ["failed_node", x, n]
    for f, t in sorted(result.coverage_loss_curve.items()):
        yield head + ["coverage_loss_time", _fraction_key(f), _num(t)]


def write_results_csv(results, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in results:
            w.writerows(result_rows(r))
    return path


def _result_dict(r: RunResult):
    d = asdict(r)
    d["coverage_loss_curve"] = {_fraction_key(f): t for f, t in sorted(r.coverage_loss_curve.items())}
    return d


def write_results_json(results, path) -> Path:
    path = Path(path)
    doc = {"schema_version": SCHEMA_VERSION, "results": [_result_dict(r) for r in results]}
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return path


def _parse(v, integer=False):
    if v == NA:
        return None
    return int(v) if integer else float(v)


def read_results_csv(path) -> list:
    """Rebuild RunResults (labels included) from a results.csv file."""
    runs = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            ident = (row["tx_range"], row["v_max"], row["static_count"], row["profile"], row["policy"])
            r = runs.get(ident)
            if r is None:
                r = runs[ident] = RunResult(policy=row["policy"])
                r.labels = {
                    "tx_range": float(row["tx_range"]),
                    "v_max": float(row["v_max"]),
                    "static_count": int(row["static_count"]),
                    "profile": int(row["profile"]),
                    "run_seed": int(row["run_seed"]),
                }
            metric, key, value = row["metric"], row["key"], row["value"]
            if metric in SCALAR_METRICS:
                setattr(r, metric, _parse(value, metric in INT_METRICS))
            elif metric == "failure_time":
                if int(key) != len(r.failure_times) + 1:
                    raise ValueError(f"{path}: failure_time rows out of order at x={key}")
                r.failure_times.append(float(value))
            elif metric == "failed_node":
                r.failed_nodes.append(int(value))
            elif metric == "coverage_loss_time":
                r.coverage_loss_curve[round(float(key), 2)] = float(value)
            else:
                raise ValueError(f"{path}: unknown metric {metric!r}")
    return list(runs.values())


def read_results_json(path) -> list:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    out = []
    for d in doc["results"]:
        d = dict(d)
        d["coverage_loss_curve"] = {round(float(f), 2): t for f, t in d["coverage_loss_curve"].items()}
        out.append(RunResult(**d))
    return out


def group_by_cell(results) -> list:
    """CellOutcomes from labelled RunResults, cells and profiles in canonical order."""
    cells = {}
    for r in results:
        lab = r.labels
        cell = Cell(float(lab["tx_range"]), float(lab["v_max"]), int(lab["static_count"]))
        o = cells.setdefault(cell, CellOutcome(cell))
        (o.max_stability if r.policy == "max-stability" else o.mst_dg).append(r)
    for o in cells.values():
        o.max_stability.sort(key=lambda r: r.labels["profile"])
        o.mst_dg.sort(key=lambda r: r.labels["profile"])
    return [cells[c] for c in sorted(cells)]


def _summary_dict(s):
    d = asdict(s)
    for name in ("mean_failure_time", "failure_probability"):
        d[name] = {str(x): v for x, v in d[name].items()}
    for name in ("mean_coverage_loss_time", "coverage_loss_probability"):
        d[name] = {_fraction_key(f): v for f, v in d[name].items()}
    return d


def cell_summary(outcome: CellOutcome) -> dict:
    entry = dict(outcome.cell._asdict())
    entry["key"] = outcome.cell.key
    for name, results in (("max-stability", outcome.max_stability), ("mst-dg", outcome.mst_dg)):
        entry[name] = _summary_dict(aggregate_batch(results)) if results else None
    if outcome.max_stability and outcome.mst_dg:
        entry["common_timeline"] = common_timeline(outcome.max_stability, outcome.mst_dg)
    return entry


def write_summary_json(outcomes, path, meta=None) -> Path:
    path = Path(path)
    doc = {"schema_version": SCHEMA_VERSION, "meta": meta or {}, "cells": [cell_summary(o) for o in outcomes]}
    path.write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n", encoding="utf-8")
    return path


SUMMARY_COLUMNS = (
    "tx_range", "v_max", "static_count", "policy", "profiles",
    "mean_node_lifetime", "mean_network_lifetime", "mean_discovery_count",
    "mean_no_tree_rounds", "coverage_loss_at_common_time",
)


def write_summary_csv(outcomes, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for o in outcomes:
            common = common_timeline(o.max_stability, o.mst_dg) if o.max_stability and o.mst_dg else None
            for name, results in (("max-stability", o.max_stability), ("mst-dg", o.mst_dg)):
                if not results:
                    continue
                s = aggregate_batch(results)
                w.writerow([
                    _num(o.cell.tx_range), _num(o.cell.v_max), o.cell.static_count, name, s.n_profiles,
                    _num(s.mean_node_lifetime), _num(s.mean_network_lifetime), _num(s.mean_discovery_count),
                    _num(s.mean_no_tree_rounds), _num(common[name]["mean_fraction"]) if common else NA,
                ])
    return path


def format_trace(state) -> str:
    lines = []
    for t in state.epochs:
        edges = ",".join(f"{u}-{v}" for u, v in sorted(t.edge_set()))
        end = "-" if t.epoch_end is None else t.epoch_end
        lines.append(f"{state.policy.value} {t.epoch_start} {end} {t.leader} {edges}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_energy_header(writer):
    writer.writerow(("round", "time_s", "node_id", "residual_J"))


def energy_logger(writer):
    """energy_log callback writing one row per node per round."""
    def log(r, t, residual):
        writer.writerows((r, repr(t), n, repr(float(e))) for n, e in enumerate(residual))
    return log
