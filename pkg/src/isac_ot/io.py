"""CSV / JSON persistence for traces, summaries and partitions.

Floats are written with ``repr`` so a file round-trips bit-exactly, and
nothing time-dependent goes into a CSV body.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CONSTRAINTS = ("C1", "C2", "C3", "C4", "C5", "C6")
SUMMARY_KEYS = ("config_hash", "seed", "algo", "G_TOL", "R_sum", "rho_sum", "crb_noncoop",
                "iterations", "converged")
POWER_TRACE_COLUMNS = ("iteration", "F", "grad_norm", "step", "G_TOL")
SWEEP_COLUMNS = ("R_min", "R_sum_avg", "crb_noncoop", "G_TOL", "feasible")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def trace_columns(M: int) -> list[str]:
    return (["slot", "iteration", "G_TOL", "R_sum", "rho_sum", "crb_distance_noncoop",
             "crb_angle_noncoop", "best_G_TOL"]
            + [f"U_{m + 1}" for m in range(M)] + list(CONSTRAINTS)
            + ["power_converged", "config_hash", "seed"])


def trace_rows(slot: int, trace, config_hash: str, seed: int) -> list[list]:
    rows = []
    for r in trace:
        rows.append([slot, r.iteration, r.G_TOL, r.R_sum, r.rho_sum, r.crb_distance_noncoop,
                     r.crb_angle_noncoop, r.best_G_TOL, *r.masses,
                     *[r.constraints.get(c, "") for c in CONSTRAINTS],
                     r.power_converged, config_hash, seed])
    return rows


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[dict]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return list(reader.fieldnames or []), list(reader)


def write_trace(path, M: int, slot_traces, config_hash: str, seed: int) -> Path:
    """``slot_traces`` is a sequence of (slot, trace) pairs."""
    rows = []
    for slot, trace in slot_traces:
        rows.extend(trace_rows(slot, trace, config_hash, seed))
    return write_csv(path, trace_columns(M), rows)


def write_power_trace(path, rows, config_hash: str, seed: int) -> Path:
    return write_csv(path, POWER_TRACE_COLUMNS + ("config_hash", "seed"),
                     [(*r, config_hash, seed) for r in rows])


def write_partition(path, cloud, partition, config_hash: str, seed: int) -> Path:
    """One row per sample point; cells are 1-based."""
    M = partition.n_cells
    header = ["point_id", "x", "y", "z", "cell"] + [f"R_{m + 1}" for m in range(M)] + [
        "config_hash", "seed"]
    pts = cloud.points
    rows = ([i, *pts[i], int(partition.labels[i]) + 1, *partition.membership[i], config_hash, seed]
            for i in range(cloud.n))
    return write_csv(path, header, rows)


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n",
                    encoding="utf-8")
    return path


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def summary(results, config, seed: int, algo: str) -> dict:
    """Slot-averaged summary of one algorithm's results (one RunResult per slot)."""
    out = {
        "config_hash": config.config_hash(),
        "seed": int(seed),
        "algo": algo,
        "G_TOL": float(np.mean([r.report.G_TOL for r in results])),
        "R_sum": float(np.mean([r.report.R_sum for r in results])),
        "rho_sum": float(np.mean([r.report.rho_sum for r in results])),
        "crb_noncoop": float(np.mean([r.report.crb_noncoop for r in results])),
        "iterations": int(max(r.iterations for r in results)),
        "converged": bool(all(r.converged for r in results)),
    }
    out["theta2"] = float(results[0].scenario.theta2)
    out["feasible"] = bool(all(r.report.feasible for r in results))
    out["config"] = config.to_dict()
    return out
