"""The weighted rate/QoS objective, constraint checks C1-C6 and power pools."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import channel, sensing
from .errors import ConfigError, InfeasibleBudget
from .scenario import Scenario, cell_masses

BUDGET_RTOL = 1e-9


@dataclass
class Solution:
    """Association plus per-UAV powers.

    ``association[j]`` is the serving station of UAV ``j`` (``K`` is the
    non-cooperative one); ``p_c[k]`` is the communication power of
    cooperative UAV ``k`` and ``p_s[j]`` the sensing power of target ``j``.
    """

    association: np.ndarray
    p_c: np.ndarray
    p_s: np.ndarray
    partition: Optional[object] = None

    def copy(self) -> "Solution":
        return Solution(self.association.copy(), self.p_c.copy(), self.p_s.copy(), self.partition)


@dataclass
class ConstraintResult:
    passed: bool
    margin: float


@dataclass
class ObjectiveReport:
    R_sum: float
    rho_sum: float
    G_TOL: float
    rates: np.ndarray
    rho: np.ndarray
    crb_distance: np.ndarray
    crb_angle: np.ndarray
    constraints: dict = field(default_factory=dict)

    @property
    def crb_noncoop(self) -> float:
        return float(self.crb_distance[-1])

    @property
    def feasible(self) -> bool:
        return all(c.passed for c in self.constraints.values())

    def to_dict(self) -> dict:
        return {
            "R_sum": self.R_sum,
            "rho_sum": self.rho_sum,
            "G_TOL": self.G_TOL,
            "crb_noncoop": self.crb_noncoop,
            "constraints": {k: {"passed": v.passed, "margin": v.margin}
                            for k, v in self.constraints.items()},
        }


def combine_gtol(R_sum: float, rho_sum: float, K: int, theta1: float, theta2: float) -> float:
    return theta1 * R_sum / K + (1.0 - theta1) * theta2 * rho_sum / (K + 1)


def _require_theta2(scenario: Scenario) -> float:
    if scenario.theta2 is None:
        raise ConfigError("theta2 unresolved: call calibrate_theta2 first")
    return scenario.theta2


def _check_shapes(solution: Solution, scenario: Scenario):
    K = scenario.K
    if (solution.association is None or len(solution.association) != K + 1
            or len(solution.p_c) != K or len(solution.p_s) != K + 1):
        raise ConfigError("solution is structurally incomplete")
    a = solution.association
    if np.any(a < 0) or np.any(a >= scenario.M):
        raise ConfigError("association refers to a nonexistent base station")


def evaluate_gtol(solution: Solution, scenario: Scenario, constraints: bool = True) -> ObjectiveReport:
    _check_shapes(solution, scenario)
    cfg = scenario.config
    theta2 = _require_theta2(scenario)
    a = np.asarray(solution.association)
    rates = channel.cooperative_rates(scenario, a, solution.p_c)
    rho = sensing.qos_coefficients(scenario, a) * solution.p_s
    crb_d, crb_t = sensing.crb_many(scenario, a, solution.p_s)
    R = float(np.sum(rates))
    P = float(np.sum(rho))
    report = ObjectiveReport(R, P, combine_gtol(R, P, scenario.K, cfg.theta1, theta2),
                             rates, rho, crb_d, crb_t)
    if constraints:
        report.constraints = check_constraints(solution, scenario, report)
    return report


def check_constraints(solution: Solution, scenario: Scenario,
                      report: Optional[ObjectiveReport] = None) -> dict:
    """Pass/fail plus signed margin per constraint; never raises on violation."""
    cfg = scenario.config
    K, M = scenario.K, scenario.M
    a = np.asarray(solution.association)
    if report is None:
        report = evaluate_gtol(solution, scenario, constraints=False)
    out: dict[str, ConstraintResult] = {}

    part = solution.partition
    if part is not None:
        recomputed = cell_masses(part.labels, M, K)
        err = float(np.max(np.abs(recomputed - part.mass)))
        out["C1"] = ConstraintResult(err <= 1e-9 * K and abs(recomputed.sum() - K) <= 1e-9 * K, -err)
        n_pts = scenario.cloud.n
        ok = (len(part.labels) == n_pts and np.all(part.labels >= 0) and np.all(part.labels < M))
        out["C2"] = ConstraintResult(bool(ok), 0.0 if ok else -1.0)

    powers = np.concatenate([solution.p_c, solution.p_s])
    box = np.minimum(powers - cfg.p_min, cfg.p_max - powers)
    m3 = float(box.min())
    out["C3"] = ConstraintResult(m3 >= -BUDGET_RTOL * cfg.p_max, m3)

    totals = np.zeros(M)
    np.add.at(totals, a[:K], solution.p_c)
    np.add.at(totals, a, solution.p_s)
    active = np.bincount(a, minlength=M) > 0
    budget = np.array([b.total_power_budget for b in scenario.base_stations])
    rel = np.abs(totals - budget)[active] / budget[active]
    m4 = float(rel.max()) if rel.size else 0.0
    out["C4"] = ConstraintResult(m4 <= BUDGET_RTOL, -m4)

    rho_k = report.rho[:K]
    m5 = float(np.min(cfg.rho_min - rho_k)) if cfg.literal_c5 else float(np.min(rho_k - cfg.rho_min))
    out["C5"] = ConstraintResult(m5 >= 0.0, m5)

    m6 = float(np.min(report.rates - cfg.r_min))
    out["C6"] = ConstraintResult(m6 >= -1e-9 * max(cfg.r_min, 1.0), m6)
    return out


def project_feasible(raw, lo, hi, total: float) -> np.ndarray:
    """Clip to [lo, hi] then rescale the unclipped links until the sum hits ``total``."""
    raw = np.asarray(raw, float)
    lo = np.broadcast_to(np.asarray(lo, float), raw.shape)
    hi = np.broadcast_to(np.asarray(hi, float), raw.shape)
    if lo.sum() > total * (1 + BUDGET_RTOL) or hi.sum() < total * (1 - BUDGET_RTOL):
        raise InfeasibleBudget(
            f"box [{lo.sum():.6g}, {hi.sum():.6g}] cannot meet budget {total:.6g}")
    p = np.clip(raw, lo, hi)
    fixed = np.zeros(p.shape, bool)
    for _ in range(len(p) + 1):
        s = p.sum()
        if abs(s - total) <= BUDGET_RTOL * total * 1e-3:
            break
        grow = s < total
        free = ~fixed & ((p < hi) if grow else (p > lo))
        if not free.any():
            break
        target = total - p[~free].sum()
        sf = p[free].sum()
        if sf > 0:
            p[free] *= target / sf
        else:
            p[free] = target / free.sum()
        clipped = (p < lo) | (p > hi)
        p = np.clip(p, lo, hi)
        fixed |= clipped
    # absorb the last rounding residue in the link with most slack
    resid = total - p.sum()
    if resid != 0.0:
        slack = (hi - p) if resid > 0 else (p - lo)
        i = int(np.argmax(slack))
        p[i] = min(max(p[i] + resid, lo[i]), hi[i])
    return p


# --------------------------------------------------------------------------
# power pools
# --------------------------------------------------------------------------

@dataclass
class PowerPool:
    """One budgeted group of links at one station.

    ``kind`` is ``"comm"`` (utility weight * log2(1 + gain * p)) or
    ``"sensing"`` (utility weight * p).
    """

    bs: int
    kind: str
    members: np.ndarray
    budget: float
    lo: np.ndarray
    hi: np.ndarray
    weight: np.ndarray
    gain: np.ndarray
    threshold_feasible: bool = True

    @property
    def size(self) -> int:
        return len(self.members)

    def utility(self, p) -> np.ndarray:
        p = np.asarray(p, float)
        if self.kind == "comm":
            return self.weight * np.log2(1.0 + self.gain * p)
        return self.weight * p

    def marginal(self, p) -> np.ndarray:
        p = np.asarray(p, float)
        if self.kind == "comm":
            return self.weight * self.gain / (np.log(2.0) * (1.0 + self.gain * p))
        return np.broadcast_to(self.weight, np.shape(p)).astype(float)


def _saturating_lower_bounds(required, lo, hi, budget):
    """Lower bounds meeting per-link requirements, or the largest common
    fraction of them the budget allows.  ``required(s)`` maps a level
    s in [0, 1] to per-link power needs."""
    def total(s):
        return np.clip(required(s), lo, hi).sum()

    if total(1.0) <= budget:
        return np.clip(required(1.0), lo, hi), True
    a, b = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (a + b)
        if total(mid) <= budget:
            a = mid
        else:
            b = mid
    return np.clip(required(a), lo, hi), False


def build_pools(scenario: Scenario, association: np.ndarray,
                enforce_thresholds: bool = True) -> list[PowerPool]:
    cfg = scenario.config
    theta2 = _require_theta2(scenario)
    K = scenario.K
    a = np.asarray(association)
    b = channel.link_bandwidth(scenario, a)
    g = channel.unit_power_snr(scenario, a, b)
    c = sensing.qos_coefficients(scenario, a)
    w_comm = cfg.theta1 * b[:K] / K
    w_sens = (1.0 - cfg.theta1) * theta2 / (K + 1) * c

    pools = []
    for m, st in enumerate(scenario.base_stations):
        comm = np.flatnonzero(a[:K] == m)
        sens = np.flatnonzero(a == m)
        if len(sens) == 0:
            continue
        if len(comm):
            b_c = cfg.comm_power_fraction * st.total_power_budget
            b_s = st.total_power_budget - b_c
        else:
            b_c, b_s = 0.0, st.total_power_budget
        lo_box, hi_box = cfg.p_min, cfg.p_max

        if len(comm):
            lo = np.full(len(comm), lo_box)
            hi = np.full(len(comm), hi_box)
            ok = True
            if enforce_thresholds and cfg.r_min > 0:
                gk, bk = g[comm], b[comm]

                def need(s, gk=gk, bk=bk):
                    with np.errstate(over="ignore"):  # unreachable rates clip to hi
                        return (np.exp2(s * cfg.r_min / bk) - 1.0) / gk

                lo, ok = _saturating_lower_bounds(need, lo, hi, b_c)
            pools.append(PowerPool(m, "comm", comm, b_c, lo, hi, w_comm[comm], g[comm], ok))

        lo = np.full(len(sens), lo_box)
        hi = np.full(len(sens), hi_box)
        ok = True
        coop = sens < K
        if enforce_thresholds and cfg.rho_min > 0 and not cfg.literal_c5 and coop.any():
            cj = c[sens]

            def need(s, cj=cj, coop=coop):
                return np.where(coop, s * cfg.rho_min / cj, 0.0)

            lo, ok = _saturating_lower_bounds(need, lo, hi, b_s)
        pools.append(PowerPool(m, "sensing", sens, b_s, lo, hi, w_sens[sens], np.zeros(len(sens)), ok))
    return pools


def scatter_pools(scenario: Scenario, pools, values) -> tuple[np.ndarray, np.ndarray]:
    """Assemble per-pool power vectors into (p_c, p_s)."""
    p_c = np.zeros(scenario.K)
    p_s = np.zeros(scenario.K + 1)
    for pool, v in zip(pools, values):
        (p_c if pool.kind == "comm" else p_s)[pool.members] = v
    return p_c, p_s


def equal_powers(scenario: Scenario, association: np.ndarray) -> Solution:
    """Every pool split evenly across its links, projected onto the box."""
    cfg = scenario.config
    pools = build_pools(_with_unit_theta2(scenario), association, enforce_thresholds=False)
    vals = [project_feasible(np.full(p.size, p.budget / p.size), cfg.p_min, cfg.p_max, p.budget)
            for p in pools]
    p_c, p_s = scatter_pools(scenario, pools, vals)
    return Solution(np.asarray(association).copy(), p_c, p_s)


def _with_unit_theta2(scenario: Scenario) -> Scenario:
    return scenario if scenario.theta2 is not None else scenario.with_theta2(1.0)


def calibrate_theta2(scenario: Scenario, association: np.ndarray) -> Scenario:
    """Resolve theta2 so both objective terms start on the same scale.

    Uses ``association`` with equal powers; a configured theta2 wins.
    """
    if scenario.theta2 is not None:
        return scenario
    sol = equal_powers(scenario, association)
    tmp = scenario.with_theta2(1.0)
    rep = evaluate_gtol(sol, tmp, constraints=False)
    K = scenario.K
    if rep.rho_sum <= 0 or not math.isfinite(rep.rho_sum):
        raise ConfigError("cannot calibrate theta2: zero initial localization QoS")
    return scenario.with_theta2((rep.R_sum / K) / (rep.rho_sum / (K + 1)))
