"""Command-line harness: ``isac-ot run|sweep-rmin|convergence``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .aibot import RunResult, run_aibot, run_baseline
from .errors import ConfigError, InfeasibleBudget, IsacOtError
from .scenario import ScenarioConfig, build_scenario, desk_config, load_config

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 1

ALGOS = {"aibot": run_aibot, "baseline": run_baseline}


def resolve_config(path: Optional[str], seed: Optional[int] = None, literal_eq6: bool = False,
                   literal_c5: bool = False, **overrides) -> ScenarioConfig:
    cfg = desk_config() if path is None else load_config(path)
    changes = dict(overrides)
    if seed is not None:
        if seed < 0 or seed >= 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
        changes["rng_seed"] = int(seed)
    if literal_eq6:
        changes["distance_exponent"] = 1
    if literal_c5:
        changes["literal_c5"] = True
    return dataclasses.replace(cfg, **changes) if changes else cfg


def run_slots(cfg: ScenarioConfig, algo: str) -> list[RunResult]:
    """One independent run per slot; slots share the point cloud."""
    solver = ALGOS[algo]
    first = build_scenario(cfg)
    out = [solver(first)]
    for n in range(1, cfg.N):
        out.append(solver(build_scenario(cfg, cloud=first.cloud, slot=n)))
    return out


def _algos(choice: str) -> list[str]:
    return ["aibot", "baseline"] if choice == "both" else [choice]


def _write_run(out: Path, cfg: ScenarioConfig, algo: str, results: list[RunResult]) -> dict:
    h, seed = cfg.config_hash(), cfg.rng_seed
    io.write_trace(out / f"trace_{algo}.csv", cfg.M,
                   [(n, r.trace) for n, r in enumerate(results)], h, seed)
    part = results[0].solution.partition
    if part is not None:
        io.write_partition(out / f"partition_{algo}.csv", results[0].scenario.cloud, part, h, seed)
    summ = io.summary(results, cfg, seed, algo)
    io.write_json(out / f"summary_{algo}.json", summ)
    return summ


def cmd_run(args) -> int:
    cfg = resolve_config(args.config, args.seed, args.literal_eq6, args.literal_c5)
    out = Path(args.out)
    io.write_json(out / "config_resolved.json", {"config_hash": cfg.config_hash(),
                                                  "config": cfg.to_dict()})
    summaries = {}
    for algo in _algos(args.algo):
        summaries[algo] = _write_run(out, cfg, algo, run_slots(cfg, algo))
    if len(summaries) == 2:
        a, b = summaries["aibot"], summaries["baseline"]
        io.write_json(out / "comparison.json", {
            "config_hash": cfg.config_hash(),
            "seed": cfg.rng_seed,
            "aibot": a,
            "baseline": b,
            "G_TOL_gain": a["G_TOL"] - b["G_TOL"],
            "G_TOL_ratio": a["G_TOL"] / b["G_TOL"],
            "crb_noncoop_change": (a["crb_noncoop"] - b["crb_noncoop"]) / b["crb_noncoop"],
        })
    return 0


def _sweep_point(cfg: ScenarioConfig, r_min: float):
    point = dataclasses.replace(cfg, r_min=float(r_min))
    results = run_slots(point, "aibot")
    return (float(r_min),
            float(np.mean([r.report.R_sum for r in results])),
            float(np.mean([r.report.crb_noncoop for r in results])),
            float(np.mean([r.report.G_TOL for r in results])),
            bool(all(r.report.feasible for r in results)))


def sweep_rmin(cfg: ScenarioConfig, r_mins: Sequence[float], jobs: int = 1) -> list[tuple]:
    """AIBOT at every threshold; every point reuses the same seed and scene."""
    r_mins = [float(r) for r in r_mins]
    if not r_mins:
        raise ConfigError("R_min list is empty")
    if any(b < a for a, b in zip(r_mins, r_mins[1:])):
        raise ConfigError("R_min list must be non-decreasing")
    if jobs > 1:
        # fork after the OpenMP runtime has started aborts the child
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as ex:
            return list(ex.map(_sweep_point, [cfg] * len(r_mins), r_mins))
    return [_sweep_point(cfg, r) for r in r_mins]


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad --rmin list {text!r}") from exc


def cmd_sweep_rmin(args) -> int:
    cfg = resolve_config(args.config, args.seed, args.literal_eq6, args.literal_c5)
    rows = sweep_rmin(cfg, _parse_floats(args.rmin), args.jobs)
    out = Path(args.out)
    h = cfg.config_hash()
    io.write_csv(out / "sweep_rmin.csv", io.SWEEP_COLUMNS + ("config_hash", "seed"),
                 [(*r, h, cfg.rng_seed) for r in rows])
    bad = sum(1 for r in rows if not r[-1])
    io.write_json(out / "sweep_rmin.json", {"config_hash": h, "seed": cfg.rng_seed,
                                            "points": len(rows), "infeasible": bad,
                                            "config": cfg.to_dict()})
    if bad:
        print(json.dumps({"warning": "infeasible R_min rows", "count": bad}), file=sys.stderr)
    return 0


def cmd_convergence(args) -> int:
    cfg = resolve_config(args.config, args.seed, args.literal_eq6, args.literal_c5)
    out = Path(args.out)
    h = cfg.config_hash()
    rows = []
    for algo in ("aibot", "baseline"):
        results = run_slots(cfg, algo)
        for n, res in enumerate(results):
            for r in res.trace:
                rows.append((algo, n, r.iteration, r.G_TOL, r.best_G_TOL,
                             r.crb_distance_noncoop, r.crb_angle_noncoop, h, cfg.rng_seed))
        io.write_json(out / f"summary_{algo}.json", io.summary(results, cfg, cfg.rng_seed, algo))
    io.write_csv(out / "convergence.csv",
                 ("algo", "slot", "iteration", "G_TOL", "best_G_TOL", "crb_distance_noncoop",
                  "crb_angle_noncoop", "config_hash", "seed"), rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isac-ot", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="scenario JSON (default: pinned desk scene)")
        sp.add_argument("--seed", type=int, default=None, help="overrides rng_seed")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--literal-eq6", action="store_true",
                        help="first-power distance in the SNR denominator")
        sp.add_argument("--literal-c5", action="store_true",
                        help="check the QoS constraint as a ceiling")

    run = sub.add_parser("run", help="run one or both algorithms")
    common(run)
    run.add_argument("--algo", choices=["aibot", "baseline", "both"], default="both")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep-rmin", help="AIBOT over a list of rate thresholds")
    common(sw)
    sw.add_argument("--algo", choices=["aibot"], default="aibot")
    sw.add_argument("--rmin", required=True, help="comma or space separated thresholds in bit/s")
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(func=cmd_sweep_rmin)

    cv = sub.add_parser("convergence", help="per-iteration traces of AIBOT and the baseline")
    common(cv)
    cv.add_argument("--algo", choices=["both"], default="both")
    cv.set_defaults(func=cmd_convergence)
    return p


def _fail(code: int, exc: Exception) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}),
          file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        try:
            return args.func(args)
        except ConfigError as exc:
            return _fail(EXIT_CONFIG, exc)
        except InfeasibleBudget as exc:
            return _fail(EXIT_INFEASIBLE, exc)
        except IsacOtError as exc:
            return _fail(EXIT_SOLVER, exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
