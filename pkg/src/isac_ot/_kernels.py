"""Per-point hot loops of the cell-association solver.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical arithmetic.  The numba path is used when numba
imports and ``ISAC_OT_NUMBA`` is not ``0``; set ``ISAC_OT_NUMBA=0`` to
force the numpy path (e.g. for debugging or on platforms without LLVM).

Ties in every argmin resolve to the lowest cell index in both paths.
Per-point loops carry no reductions, so results do not depend on the
numba thread count.
"""

from __future__ import annotations

import os

import numpy as np

MASS_FLOOR = 1e-6

try:  # pragma: no cover - exercised implicitly
    import numba
    from numba import njit, prange

    # the results never depend on the layer; this only skips probing an old TBB
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("ISAC_OT_NUMBA", "1") != "0"


# --------------------------------------------------------------------------
# numpy reference path
# --------------------------------------------------------------------------

def theorem1_labels_np(density, mass, n_uav):
    u = np.maximum(mass, MASS_FLOOR)
    score = -density / u + density / (u * n_uav)
    return np.argmin(score, axis=1).astype(np.int64)


def membership_update_np(membership, labels, t):
    keep = 1.0 - 1.0 / t
    out = 1.0 - keep * (1.0 - membership)
    rows = np.arange(labels.shape[0])
    out[rows, labels] = keep * membership[rows, labels]
    return out


def cell_mass_np(membership, n_uav):
    share = (1.0 - membership).mean(axis=0)
    return n_uav * share / share.sum()


def alg1_loop_np(density, labels0, n_uav, n_iter):
    n, m = density.shape
    membership = np.zeros((n, m))
    labels = labels0.astype(np.int64).copy()
    mass_hist = np.empty((n_iter, m))
    label_hist = np.empty((n_iter, n), dtype=np.int64)
    for t in range(1, n_iter + 1):
        mass = cell_mass_np(membership, n_uav)
        labels = theorem1_labels_np(density, mass, n_uav)
        membership = membership_update_np(membership, labels, t)
        mass_hist[t - 1] = mass
        label_hist[t - 1] = labels
    return labels, membership, mass_hist, label_hist


def voronoi_labels_np(points, sites, weights):
    dx = points[:, 0:1] - sites[None, :, 0]
    dy = points[:, 1:2] - sites[None, :, 1]
    dz = points[:, 2:3] - sites[None, :, 2]
    cost = dx * dx + dy * dy + dz * dz - weights[None, :]
    return np.argmin(cost, axis=1).astype(np.int64)


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if _HAVE_NUMBA:
    _opts = dict(cache=True, fastmath=False, nogil=True, error_model="numpy")

    @njit(parallel=True, **_opts)
    def theorem1_labels_nb(density, mass, n_uav):
        n, m = density.shape
        u = np.empty(m)
        for i in range(m):
            u[i] = mass[i] if mass[i] > MASS_FLOOR else MASS_FLOOR
        labels = np.empty(n, dtype=np.int64)
        for q in prange(n):
            best = 0
            g = density[q, 0]
            best_score = -g / u[0] + g / (u[0] * n_uav)
            for i in range(1, m):
                g = density[q, i]
                s = -g / u[i] + g / (u[i] * n_uav)
                if s < best_score:
                    best_score = s
                    best = i
            labels[q] = best
        return labels

    @njit(parallel=True, **_opts)
    def membership_update_nb(membership, labels, t):
        n, m = membership.shape
        keep = 1.0 - 1.0 / t
        out = np.empty_like(membership)
        for q in prange(n):
            for i in range(m):
                if labels[q] == i:
                    out[q, i] = keep * membership[q, i]
                else:
                    out[q, i] = 1.0 - keep * (1.0 - membership[q, i])
        return out

    @njit(**_opts)
    def cell_mass_nb(membership, n_uav):
        n, m = membership.shape
        share = np.zeros(m)
        for i in range(m):
            share[i] = (1.0 - membership[:, i]).sum() / n
        return n_uav * share / share.sum()

    @njit(**_opts)
    def alg1_loop_nb(density, labels0, n_uav, n_iter):
        n, m = density.shape
        membership = np.zeros((n, m))
        labels = labels0.copy()
        mass_hist = np.empty((n_iter, m))
        label_hist = np.empty((n_iter, n), dtype=np.int64)
        for t in range(1, n_iter + 1):
            mass = cell_mass_nb(membership, n_uav)
            labels = theorem1_labels_nb(density, mass, n_uav)
            membership = membership_update_nb(membership, labels, t)
            mass_hist[t - 1] = mass
            label_hist[t - 1] = labels
        return labels, membership, mass_hist, label_hist

    @njit(parallel=True, **_opts)
    def voronoi_labels_nb(points, sites, weights):
        n = points.shape[0]
        m = sites.shape[0]
        labels = np.empty(n, dtype=np.int64)
        for q in prange(n):
            best = 0
            best_cost = np.inf
            for i in range(m):
                dx = points[q, 0] - sites[i, 0]
                dy = points[q, 1] - sites[i, 1]
                dz = points[q, 2] - sites[i, 2]
                c = dx * dx + dy * dy + dz * dz - weights[i]
                if c < best_cost:
                    best_cost = c
                    best = i
            labels[q] = best
        return labels


def _pick(name):
    if USE_NUMBA:
        return globals()[name + "_nb"]
    return globals()[name + "_np"]


def theorem1_labels(density, mass, n_uav):
    """Per-point argmin of the association score; ``density`` is (n, M)."""
    density = np.ascontiguousarray(density, dtype=np.float64)
    mass = np.ascontiguousarray(mass, dtype=np.float64)
    return _pick("theorem1_labels")(density, mass, float(n_uav))


def membership_update(membership, labels, t):
    membership = np.ascontiguousarray(membership, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    return _pick("membership_update")(membership, labels, float(t))


def cell_mass(membership, n_uav):
    membership = np.ascontiguousarray(membership, dtype=np.float64)
    return _pick("cell_mass")(membership, float(n_uav))


def alg1_loop(density, labels0, n_uav, n_iter):
    density = np.ascontiguousarray(density, dtype=np.float64)
    labels0 = np.ascontiguousarray(labels0, dtype=np.int64)
    return _pick("alg1_loop")(density, labels0, float(n_uav), int(n_iter))


def voronoi_labels(points, sites, weights):
    points = np.ascontiguousarray(points, dtype=np.float64)
    sites = np.ascontiguousarray(sites, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    return _pick("voronoi_labels")(points, sites, weights)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
