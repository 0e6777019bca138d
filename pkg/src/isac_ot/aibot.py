"""Alternating association / power optimization and the comparison baseline."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import association as assoc_mod
from .errors import IsacOtError
from .objective import (ObjectiveReport, Solution, calibrate_theta2, equal_powers,
                        evaluate_gtol)
from .power import run_alg2, water_filling
from .scenario import Scenario


@dataclass
class TraceRow:
    iteration: int
    G_TOL: float
    R_sum: float
    rho_sum: float
    crb_distance_noncoop: float
    crb_angle_noncoop: float
    best_G_TOL: float
    masses: np.ndarray
    constraints: dict
    power_converged: bool
    wall_time: float


@dataclass
class RunResult:
    solution: Solution
    report: ObjectiveReport
    trace: list
    scenario: Scenario
    converged: bool
    algo: str

    @property
    def iterations(self) -> int:
        return len(self.trace)


def _row(t, report, best, masses, power_converged, t0) -> TraceRow:
    return TraceRow(
        iteration=t,
        G_TOL=report.G_TOL,
        R_sum=report.R_sum,
        rho_sum=report.rho_sum,
        crb_distance_noncoop=float(report.crb_distance[-1]),
        crb_angle_noncoop=float(report.crb_angle[-1]),
        best_G_TOL=best,
        masses=np.asarray(masses, float).copy(),
        constraints={k: v.passed for k, v in report.constraints.items()},
        power_converged=power_converged,
        wall_time=time.perf_counter() - t0,
    )


def prepare(scenario: Scenario) -> Scenario:
    """Resolve theta2 against the plain-Voronoi, equal-power starting point."""
    start = assoc_mod.voronoi_partition(scenario)
    return calibrate_theta2(scenario, start.uav_labels)


def run_aibot(scenario: Scenario, T3: Optional[int] = None,
              tol_outer: Optional[float] = None) -> RunResult:
    """Alternate OT cell association and dual power allocation.

    Stops once the relative change of the objective drops below
    ``tol_outer`` or after ``T3`` rounds, and returns the best solution
    seen along the way.
    """
    cfg = scenario.config
    T3 = cfg.T3 if T3 is None else T3
    tol_outer = cfg.tol_outer if tol_outer is None else tol_outer
    if T3 < 1:
        raise ValueError("T3 must be >= 1")
    scenario = prepare(scenario)

    start = assoc_mod.voronoi_partition(scenario)
    current = equal_powers(scenario, start.uav_labels)
    labels = start.labels
    trace: list[TraceRow] = []
    best: Optional[Solution] = None
    best_report: Optional[ObjectiveReport] = None
    converged = False
    t0 = time.perf_counter()

    for t in range(1, T3 + 1):
        try:
            part = assoc_mod.run_alg1(scenario, current, init_labels=labels)
            state = run_alg2(scenario, part.uav_labels)
        except IsacOtError as exc:
            raise type(exc)(f"outer iteration {t}: {exc}") from exc
        current = Solution(part.uav_labels.copy(), state.p_c, state.p_s, part)
        labels = part.labels
        report = evaluate_gtol(current, scenario)
        if best_report is None or report.G_TOL > best_report.G_TOL:
            best, best_report = current.copy(), report
        trace.append(_row(t, report, best_report.G_TOL, part.mass, state.converged, t0))
        if t >= 2:
            prev = trace[-2].G_TOL
            if abs(report.G_TOL - prev) <= tol_outer * abs(prev):
                converged = True
                break

    return RunResult(best, best_report, trace, scenario, converged, "aibot")


def run_baseline(scenario: Scenario) -> RunResult:
    """Plain weighted-Voronoi association (zero weights) with water-filling."""
    scenario = prepare(scenario)
    t0 = time.perf_counter()
    part = assoc_mod.voronoi_partition(scenario)
    state = water_filling(scenario, part.uav_labels)
    sol = Solution(part.uav_labels.copy(), state.p_c, state.p_s, part)
    report = evaluate_gtol(sol, scenario)
    row = _row(1, report, report.G_TOL, part.mass, True, t0)
    return RunResult(sol, report, [row], scenario, True, "baseline")
