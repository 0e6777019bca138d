"""Semi-discrete OT cell association and the weighted-Voronoi baseline."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels, channel
from .objective import Solution
from .scenario import SamplePointCloud, Scenario, cell_masses


@dataclass
class Partition:
    """Cells represented extensionally as labels over the shared cloud.

    ``mass`` is K times the fraction of cloud points per cell (recomputed
    from ``labels``); ``score_mass`` is the membership-averaged mass that
    produced the final labels.
    """

    labels: np.ndarray
    mass: np.ndarray
    membership: np.ndarray
    uav_labels: np.ndarray
    score_mass: np.ndarray
    mass_history: Optional[np.ndarray] = None
    label_history: Optional[np.ndarray] = None
    collapsed: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return len(self.mass)


def theorem1_score(density: float, mass: float, n_uav: int) -> float:
    """Cost of placing a point with objective density ``density`` in a cell of mass ``mass``."""
    u = max(mass, _kernels.MASS_FLOOR)
    return -density / u + density / (u * n_uav)


def update_membership(membership, labels, t: int) -> np.ndarray:
    if t < 1:
        raise ValueError("iteration counter starts at 1")
    return _kernels.membership_update(membership, labels, t)


def association_cost(density: np.ndarray, labels: np.ndarray, n_uav: int) -> float:
    """Discretized cell-association cost: -mean over points of G_l(q) / U_l."""
    M = density.shape[1]
    mass = np.maximum(cell_masses(labels, M, n_uav), _kernels.MASS_FLOOR)
    g = density[np.arange(len(labels)), labels]
    return float(-np.mean(g / mass[labels]))


def alg1_from_density(density: np.ndarray, n_uav: int, n_iter: int,
                      init_labels: np.ndarray, record: bool = False):
    """Membership-averaged argmin relabeling on a fixed density matrix.

    Returns (labels, membership, last score mass, mass history, label history).
    """
    if n_iter < 1:
        raise ValueError("T1 must be >= 1")
    labels, memb, mh, lh = _kernels.alg1_loop(density, init_labels, n_uav, n_iter)
    if not record:
        return labels, memb, mh[-1].copy(), None, None
    return labels, memb, mh[-1].copy(), mh, lh


def association_density(scenario: Scenario, solution: Solution, points: np.ndarray,
                        comm: bool = True) -> np.ndarray:
    """Objective density G_i(q) of a UAV at q served with all of station i's resources.

    The rate term uses the station's whole band and the communication
    power it currently spends; under an even split the per-link SNR does
    not depend on the number of users (power and noise band both scale
    as 1/n), so dividing by the cell mass recovers the per-UAV share.
    The QoS term likewise uses the station's whole sensing power, with
    the nominal even bandwidth share B M / K; using the current share
    instead lets a station that just lost its users win them all back,
    and the alternation cycles.  Stations serving nobody are credited
    with their nominal pools.  ``comm=False`` drops the rate term (a
    sensing-only target).
    """
    cfg = scenario.config
    K, M = scenario.K, scenario.M
    a = np.asarray(solution.association)
    lam = cfg.wavelength
    bs = scenario.bs_positions
    diff = points[:, None, :] - bs[None, :, :]
    d = np.sqrt((diff * diff).sum(-1))
    d = np.maximum(d, 1e-9)

    counts = channel.coop_counts(scenario, a)
    total_bw = np.array([b.total_bandwidth for b in scenario.base_stations])
    budget = np.array([b.total_power_budget for b in scenario.base_stations])
    n_t = np.array([b.n_t for b in scenario.base_stations], float)

    p_comm = cfg.comm_power_fraction * budget
    p_sens = budget - p_comm
    for m in range(M):
        if counts[m]:
            p_comm[m] = solution.p_c[a[:K] == m].sum()
            p_sens[m] = solution.p_s[a == m].sum()

    snr = (p_comm * lam**2 * n_t) / (16 * np.pi**2 * cfg.noise_psd * total_bw * d**cfg.distance_exponent)
    rate = total_bw * np.log2(1.0 + snr)
    gain2 = cfg.reference_gain * (lam / (4 * np.pi * d)) ** 2
    b_link = total_bw * M / K
    qos = p_sens * gain2 * (cfg.varpi1 * b_link / cfg.beta1 + cfg.varpi2 / cfg.beta2)
    theta2 = 1.0 if scenario.theta2 is None else scenario.theta2
    out = (1.0 - cfg.theta1) * theta2 * qos / (K + 1)
    if comm:
        out = out + cfg.theta1 * rate / K
    return out


def run_alg1(scenario: Scenario, solution: Solution, T1: Optional[int] = None,
             init_labels: Optional[np.ndarray] = None, record: bool = False) -> Partition:
    """Cell association for fixed powers.

    Starts from ``init_labels`` (plain Voronoi when omitted) with zero
    membership and runs ``T1`` mass/relabel/membership rounds.
    """
    T1 = scenario.config.T1 if T1 is None else T1
    K, M = scenario.K, scenario.M
    pts = scenario.cloud.points
    density = association_density(scenario, solution, pts)
    if init_labels is None:
        init_labels = _kernels.voronoi_labels(pts, scenario.bs_positions, np.zeros(M))
    labels, memb, last_mass, mh, lh = alg1_from_density(density, K, T1, init_labels, record)

    uav_pos = scenario.uav_positions
    uav_density = np.vstack([
        association_density(scenario, solution, uav_pos[:K]),
        association_density(scenario, solution, uav_pos[K:], comm=False),
    ])
    uav_labels = _kernels.theorem1_labels(uav_density, last_mass, K)

    mass = cell_masses(labels, M, K)
    collapsed = M > 1 and np.count_nonzero(mass) == 1
    if collapsed:
        warnings.warn("cell association collapsed onto a single base station", RuntimeWarning)
    part = Partition(labels, mass, memb, uav_labels, last_mass, mh, lh, collapsed)
    if record:
        part.meta["density"] = density
    return part


def weighted_voronoi(cloud: SamplePointCloud, bs_positions: np.ndarray, weights=None,
                     n_uav: int = 1, uav_positions: Optional[np.ndarray] = None) -> Partition:
    """Power diagram: q goes to argmin_m |q - B_m|^2 - w_m."""
    bs_positions = np.asarray(bs_positions, float)
    M = len(bs_positions)
    w = np.zeros(M) if weights is None else np.asarray(weights, float)
    labels = _kernels.voronoi_labels(cloud.points, bs_positions, w)
    mass = cell_masses(labels, M, n_uav)
    memb = np.ones((cloud.n, M))
    memb[np.arange(cloud.n), labels] = 0.0
    if uav_positions is None:
        uav_labels = np.zeros(0, dtype=np.int64)
    else:
        uav_labels = _kernels.voronoi_labels(np.asarray(uav_positions, float), bs_positions, w)
    return Partition(labels, mass, memb, uav_labels, mass.copy())


def voronoi_partition(scenario: Scenario, weights=None) -> Partition:
    return weighted_voronoi(scenario.cloud, scenario.bs_positions, weights,
                            scenario.K, scenario.uav_positions)
