"""Transmit-power allocation for a fixed association.

The solver works on the Kantorovich dual of moving each pool's power
budget (source mass) onto its links (targets).  Every pool carries one
potential, a normalized price ``lam``; the link-side potential is its
c-transform, the infimum over the admissible powers of the
price-adjusted negative utility.  The dual objective is concave in the
prices, and its gradient is the budget residual of the c-transform
maximizers, so the doubling line search climbs it until the budgets
clear.  Pools are independent, so each takes its own step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import OracleTooLarge
from .objective import (PowerPool, Solution, build_pools, evaluate_gtol, project_feasible,
                        scatter_pools)
from .scenario import Scenario

LN2 = np.log(2.0)
ORACLE_LIMIT = 1_000_000


@dataclass
class PowerState:
    p_c: np.ndarray
    p_s: np.ndarray
    phi: np.ndarray
    F: float
    grad_norm: float
    converged: bool = True
    iterations: int = 0
    trace: list = field(default_factory=list)
    G_TOL: float = float("nan")

    def solution(self, association) -> Solution:
        return Solution(np.asarray(association).copy(), self.p_c.copy(), self.p_s.copy())


def c_transform(costs, psi=0.0):
    """inf over the admissible set (last axis) of ``costs`` minus the potential ``psi``."""
    costs = np.asarray(costs, float)
    return costs.min(axis=-1) - psi


def price_scale(pool: PowerPool) -> float:
    """Mean marginal utility at the even split; makes prices O(1)."""
    p_eq = np.clip(pool.budget / pool.size, pool.lo, pool.hi)
    k = float(np.mean(pool.marginal(p_eq)))
    return k if k > 0 else 1.0


def _candidates(pool: PowerPool, nu: float) -> np.ndarray:
    cols = [pool.lo, pool.hi]
    if pool.kind == "comm":
        if nu > 0:
            stat = pool.weight / (nu * LN2) - 1.0 / pool.gain
        else:
            stat = pool.hi
        cols.append(np.clip(stat, pool.lo, pool.hi))
    return np.stack(cols, axis=-1)


def conjugate(pool: PowerPool, nu: float):
    """Per-link c-transform at price ``nu``: (sup_p u(p) - nu p, maximizer)."""
    cand = _candidates(pool, nu)
    util = (pool.weight[:, None] * np.log2(1.0 + pool.gain[:, None] * cand)
            if pool.kind == "comm" else pool.weight[:, None] * cand)
    costs = -util + nu * cand
    phi = c_transform(costs)
    arg = np.argmin(costs, axis=-1)
    return -phi, cand[np.arange(pool.size), arg]


def pool_dual(pool: PowerPool, lam: float, scale: Optional[float] = None):
    """(F, dF/dlam, maximizer) for one pool at normalized price ``lam``."""
    k = price_scale(pool) if scale is None else scale
    nu = lam * k
    h, p = conjugate(pool, nu)
    F = -(nu * pool.budget + h.sum()) / (k * pool.budget)
    grad = p.sum() / pool.budget - 1.0
    return F, grad, p


def dual_value(phi, pools, scales=None) -> float:
    scales = scales or [price_scale(p) for p in pools]
    return float(sum(pool_dual(p, l, s)[0] for p, l, s in zip(pools, phi, scales)))


def gradient(phi, pools, scales=None) -> np.ndarray:
    scales = scales or [price_scale(p) for p in pools]
    return np.array([pool_dual(p, l, s)[1] for p, l, s in zip(pools, phi, scales)])


def repair(pool: PowerPool, p: np.ndarray) -> np.ndarray:
    """Make a pool's powers exactly budget-feasible.

    Linear (sensing) pools are filled greedily by weight, which is the
    exact optimum; concave pools go through clip-rescale projection.
    """
    if pool.kind == "sensing":
        out = pool.lo.astype(float).copy()
        left = pool.budget - out.sum()
        for i in np.argsort(-pool.weight, kind="stable"):
            add = min(pool.hi[i] - out[i], left)
            out[i] += add
            left -= add
            if left <= 0:
                break
        return project_feasible(out, pool.lo, pool.hi, pool.budget)
    return project_feasible(p, pool.lo, pool.hi, pool.budget)


def recover(pools, raw):
    return [repair(pool, p) for pool, p in zip(pools, raw)]


def run_alg2(scenario: Scenario, association, T2: Optional[int] = None,
             tol_grad: Optional[float] = None, step_base: Optional[float] = None,
             max_doublings: Optional[int] = None, trace: bool = False,
             enforce_thresholds: bool = True) -> PowerState:
    """Dual ascent with the doubling step rule; returns feasible powers.

    Each iteration proposes lam + m * grad.  If that improves the dual
    the step keeps doubling while it improves; otherwise it is halved
    until it does.  A pool whose step collapses without improvement sits
    on a kink of its dual and is treated as settled.
    """
    cfg = scenario.config
    T2 = cfg.T2 if T2 is None else T2
    tol_grad = cfg.tol_grad if tol_grad is None else tol_grad
    m1 = cfg.step_base if step_base is None else step_base
    max_doublings = cfg.max_doublings if max_doublings is None else max_doublings
    if tol_grad <= 0 or m1 <= 0:
        raise ValueError("tol_grad and step_base must be positive")

    association = np.asarray(association)
    pools = build_pools(scenario, association, enforce_thresholds)
    scales = [price_scale(p) for p in pools]
    lam = np.ones(len(pools))
    settled = np.zeros(len(pools), bool)
    rows = []

    def evaluate(lam_vec):
        out = [pool_dual(p, l, s) for p, l, s in zip(pools, lam_vec, scales)]
        return (np.array([o[0] for o in out]), np.array([o[1] for o in out]), [o[2] for o in out])

    F, g, raw = evaluate(lam)
    it = 0
    for it in range(1, T2 + 1):
        settled |= np.abs(g) < tol_grad
        if settled.all():
            it -= 1
            break
        steps = np.zeros(len(pools))
        for i, pool in enumerate(pools):
            if settled[i]:
                continue
            m = m1
            f_try = pool_dual(pool, lam[i] + m * g[i], scales[i])[0]
            if f_try > F[i]:
                for _ in range(max_doublings):
                    f2 = pool_dual(pool, lam[i] + 2 * m * g[i], scales[i])[0]
                    if f2 > f_try:
                        m, f_try = 2 * m, f2
                    else:
                        break
            else:
                for _ in range(60):
                    m *= 0.5
                    f_try = pool_dual(pool, lam[i] + m * g[i], scales[i])[0]
                    if f_try > F[i]:
                        break
                else:
                    settled[i] = True
                    continue
            lam[i] += m * g[i]
            steps[i] = m
        F, g, raw = evaluate(lam)
        if trace:
            p_c, p_s = scatter_pools(scenario, pools, recover(pools, raw))
            G = evaluate_gtol(Solution(association, p_c, p_s), scenario, constraints=False).G_TOL
            rows.append((it, float(F.sum()), float(np.linalg.norm(g)), float(steps.max()), G))
        if settled.all():
            break

    settled |= np.abs(g) < tol_grad
    p_c, p_s = scatter_pools(scenario, pools, recover(pools, raw))
    G = evaluate_gtol(Solution(association, p_c, p_s), scenario, constraints=False).G_TOL
    return PowerState(p_c, p_s, lam, float(F.sum()), float(np.linalg.norm(g)),
                      bool(settled.all()), it, rows, G)


# --------------------------------------------------------------------------
# baselines and oracle
# --------------------------------------------------------------------------

def water_level(gains, budget: float, iters: int = 200):
    """Classic water-filling p_k = [mu - 1/g_k]_+ with sum p = budget (bisection on mu)."""
    inv = 1.0 / np.asarray(gains, float)
    lo, hi = float(inv.min()), float(inv.max()) + budget
    for _ in range(iters):
        mu = 0.5 * (lo + hi)
        if np.maximum(mu - inv, 0.0).sum() > budget:
            hi = mu
        else:
            lo = mu
    mu = 0.5 * (lo + hi)
    return np.maximum(mu - inv, 0.0), mu


def water_filling(scenario: Scenario, association) -> PowerState:
    """Unweighted water-filling on communication pools, even sensing split."""
    cfg = scenario.config
    association = np.asarray(association)
    pools = build_pools(scenario, association, enforce_thresholds=False)
    vals = []
    for pool in pools:
        if pool.kind == "comm":
            p, _ = water_level(pool.gain, pool.budget)
        else:
            p = np.full(pool.size, pool.budget / pool.size)
        vals.append(project_feasible(p, cfg.p_min, cfg.p_max, pool.budget))
    p_c, p_s = scatter_pools(scenario, pools, vals)
    G = evaluate_gtol(Solution(association, p_c, p_s), scenario, constraints=False).G_TOL
    return PowerState(p_c, p_s, np.zeros(0), float("nan"), float("nan"), True, 1, [], G)


def _pool_grid(pool: PowerPool, levels: int):
    """All budget-feasible grid points of one pool: (n_combos, size) powers."""
    if pool.size == 1:
        pts = np.array([[pool.budget]])
    else:
        axes = [np.linspace(pool.lo[i], pool.hi[i], levels) for i in range(pool.size - 1)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, pool.size - 1)
        last = pool.budget - mesh.sum(axis=1)
        pts = np.column_stack([mesh, last])
    tol = 1e-12 * max(pool.budget, 1.0)
    ok = np.all((pts >= pool.lo - tol) & (pts <= pool.hi + tol), axis=1)
    return np.clip(pts[ok], pool.lo, pool.hi)


def grid_search_oracle(scenario: Scenario, association, levels_per_link: int = 16,
                       enforce_thresholds: bool = True) -> PowerState:
    """Exhaustive search of the Cartesian power grid.

    In every pool all links but the last take ``levels_per_link`` evenly
    spaced values and the last link absorbs the rest of the budget, so
    only combinations meeting the budget with equality are visited.
    """
    association = np.asarray(association)
    pools = build_pools(scenario, association, enforce_thresholds)
    size = 1
    for pool in pools:
        size *= levels_per_link ** max(pool.size - 1, 0)
    if size > ORACLE_LIMIT:
        raise OracleTooLarge(f"{size} grid combinations exceed {ORACLE_LIMIT}")

    grids = [_pool_grid(pool, levels_per_link) for pool in pools]
    tables = [pool.utility(grid).sum(axis=1) for pool, grid in zip(pools, grids)]
    if any(len(t) == 0 for t in tables):
        raise OracleTooLarge("no budget-feasible grid point in some pool")
    total = tables[0]
    for t in tables[1:]:
        total = np.add.outer(total, t)
    idx = np.unravel_index(int(np.argmax(total)), total.shape)
    vals = [grid[i] for grid, i in zip(grids, idx)]
    p_c, p_s = scatter_pools(scenario, pools, vals)
    G = evaluate_gtol(Solution(association, p_c, p_s), scenario, constraints=False).G_TOL
    return PowerState(p_c, p_s, np.zeros(0), float("nan"), float("nan"), True, size, [], G)
