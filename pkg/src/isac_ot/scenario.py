"""Geometry, actors, spatial density and the shared Monte-Carlo cloud."""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DegenerateGeometry

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ConfigError(f"expected a finite 3-vector, got {v!r}")
    return a


# --------------------------------------------------------------------------
# actors
# --------------------------------------------------------------------------

class UavKind(enum.Enum):
    COOPERATIVE = "cooperative"
    NON_COOPERATIVE = "non_cooperative"


@dataclass(frozen=True)
class BaseStation:
    id: int
    position: np.ndarray
    antenna_elements: np.ndarray  # (n_t, 3) offsets from position
    total_power_budget: float
    total_bandwidth: float

    def __post_init__(self):
        if len(self.antenna_elements) == 0:
            raise ConfigError("base station needs at least one antenna element")
        if self.total_power_budget <= 0 or self.total_bandwidth <= 0:
            raise ConfigError("power budget and bandwidth must be positive")

    @property
    def n_t(self) -> int:
        return len(self.antenna_elements)


@dataclass(frozen=True)
class UavNode:
    id: int
    position: np.ndarray
    kind: UavKind


def planar_array(rows: int, cols: int, spacing: float) -> np.ndarray:
    """Element offsets of a rows x cols uniform planar array in the xy-plane."""
    ix, iy = np.meshgrid(np.arange(cols), np.arange(rows), indexing="xy")
    x = (ix.ravel() - (cols - 1) / 2.0) * spacing
    y = (iy.ravel() - (rows - 1) / 2.0) * spacing
    return np.column_stack([x, y, np.zeros_like(x)])


# --------------------------------------------------------------------------
# spatial density
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpatialDensity:
    """Uniform or truncated isotropic Gaussian mixture on a 3D box."""

    lower: np.ndarray
    upper: np.ndarray
    kind: str = "uniform"
    means: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    stds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if np.any(self.upper <= self.lower):
            raise ConfigError("density bounds must satisfy lower < upper")
        if self.kind not in ("uniform", "gaussian_mixture"):
            raise ConfigError(f"unknown density kind {self.kind!r}")
        if self.kind == "gaussian_mixture":
            if len(self.means) == 0 or not len(self.means) == len(self.stds) == len(self.weights):
                raise ConfigError("mixture needs matching means/stds/weights")
            if np.any(self.stds <= 0):
                raise ConfigError("mixture std devs must be positive")
            if not math.isclose(float(np.sum(self.weights)), 1.0, rel_tol=1e-9):
                raise ConfigError("mixture weights must sum to 1")

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def box_probability(self, lo, hi) -> float:
        """Probability mass of the (normalized) density inside [lo, hi]."""
        lo = np.maximum(np.asarray(lo, float), self.lower)
        hi = np.minimum(np.asarray(hi, float), self.upper)
        if np.any(hi <= lo):
            return 0.0
        if self.kind == "uniform":
            return float(np.prod(hi - lo) / self.volume)
        return float(self._mixture_mass(lo, hi) / self._mixture_mass(self.lower, self.upper))

    def _component_mass(self, lo, hi):
        # isotropic components factor over axes
        a = (lo[None, :] - self.means) / self.stds[:, None]
        b = (hi[None, :] - self.means) / self.stds[:, None]
        return np.prod(ndtr(b) - ndtr(a), axis=1)

    def _mixture_mass(self, lo, hi):
        return float(np.dot(self.weights, self._component_mass(lo, hi)))

    def pdf(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, float))
        inside = np.all((pts >= self.lower) & (pts <= self.upper), axis=1)
        if self.kind == "uniform":
            return np.where(inside, 1.0 / self.volume, 0.0)
        d2 = ((pts[:, None, :] - self.means[None]) ** 2).sum(-1)
        s2 = self.stds[None] ** 2
        comp = np.exp(-0.5 * d2 / s2) / (2 * np.pi * s2) ** 1.5
        raw = comp @ self.weights
        return np.where(inside, raw / self._mixture_mass(self.lower, self.upper), 0.0)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            return self.lower + (self.upper - self.lower) * rng.random((n, 3))
        out = np.empty((n, 3))
        filled = 0
        while filled < n:
            need = n - filled
            batch = max(need * 2, 64)
            comp = rng.choice(len(self.weights), size=batch, p=self.weights)
            pts = self.means[comp] + self.stds[comp, None] * rng.standard_normal((batch, 3))
            ok = np.all((pts >= self.lower) & (pts <= self.upper), axis=1)
            pts = pts[ok][:need]
            out[filled:filled + len(pts)] = pts
            filled += len(pts)
        return out


@dataclass(frozen=True)
class SamplePointCloud:
    points: np.ndarray
    seed: Optional[int]

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)


def sample_points(density: SpatialDensity, n: int, seed) -> SamplePointCloud:
    """Draw ``n`` i.i.d. points from ``density``; bit-identical per seed."""
    if n < 1:
        raise ConfigError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    return SamplePointCloud(points=density.sample(n, rng), seed=seed)


# --------------------------------------------------------------------------
# geometry primitives
# --------------------------------------------------------------------------

def departure_angles(bs, uav) -> tuple[float, float]:
    """Azimuth in (-pi, pi] and elevation in [0, pi] from ``uav`` to ``bs``."""
    bs = np.asarray(bs, float)
    uav = np.asarray(uav, float)
    diff = bs - uav
    dist = float(np.sqrt(diff @ diff))
    if dist == 0.0:
        raise DegenerateGeometry("base station and UAV coincide")
    if diff[0] == 0.0 and diff[1] == 0.0:
        az = 0.0
    else:
        az = math.atan2(diff[1], diff[0])
        if az == -math.pi:
            az = math.pi
    el = math.acos(min(1.0, max(-1.0, diff[2] / dist)))
    return az, el


def departure_angles_many(bs_pos: np.ndarray, uav_pos: np.ndarray):
    """Vectorized angles for all (uav, bs) pairs: arrays of shape (J, M)."""
    diff = bs_pos[None, :, :] - uav_pos[:, None, :]
    dist = np.linalg.norm(diff, axis=-1)
    if np.any(dist == 0.0):
        raise DegenerateGeometry("base station and UAV coincide")
    az = np.arctan2(diff[..., 1], diff[..., 0])
    az = np.where((diff[..., 0] == 0.0) & (diff[..., 1] == 0.0), 0.0, az)
    az = np.where(az == -np.pi, np.pi, az)
    el = np.arccos(np.clip(diff[..., 2] / dist, -1.0, 1.0))
    return az, el, dist


def average_uav_count(cloud: SamplePointCloud, membership, n_uav: int, m: int) -> float:
    """Expected number of UAVs in cell ``m``.

    ``membership`` is either a label per point or an (n, M) array of
    per-cell weights (each row summing to one).
    """
    membership = np.asarray(membership)
    if membership.shape[0] != cloud.n:
        raise ConfigError("membership must cover every point")
    if membership.ndim == 1:
        frac = np.count_nonzero(membership == m) / cloud.n
    else:
        frac = float(np.sum(membership[:, m]) / np.sum(membership))
    return n_uav * frac


def cell_masses(labels: np.ndarray, n_cells: int, n_uav: int) -> np.ndarray:
    """All cell masses at once; sums to ``n_uav`` up to rounding."""
    counts = np.bincount(labels, minlength=n_cells).astype(np.float64)
    return n_uav * counts / counts.sum()


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

_DBM_KEYS = {
    "p_min_dbm": "p_min",
    "p_max_dbm": "p_max",
    "total_power_dbm": "total_power",
    "noise_psd_dbm_hz": "noise_psd",
}
_DB_KEYS = {"reference_gain_db": "reference_gain", "reference_gain_dbw": "reference_gain"}


@dataclass(frozen=True)
class ScenarioConfig:
    """All global constants of one scenario.  Powers in W, PSD in W/Hz."""

    M: int = 6
    K: int = 18
    N: int = 1
    slot_duration: float = 1.0
    carrier_frequency: float = 30e9
    noise_psd: float = dbm_to_watt(-169.0)
    p_min: float = dbm_to_watt(0.0)
    p_max: float = dbm_to_watt(40.0)
    total_power: float = dbm_to_watt(40.0)
    reference_gain: float = db_to_linear(-50.0)
    bandwidth: float = 100e6
    antenna_rows: int = 4
    antenna_cols: int = 4
    bs_height: float = 25.0
    bs_radius: float = 300.0
    bs_positions: Optional[tuple] = None
    uav_positions: Optional[tuple] = None
    region_min: tuple = (0.0, 0.0, 50.0)
    region_max: tuple = (1000.0, 1000.0, 150.0)
    density: dict = field(default_factory=lambda: {"kind": "uniform"})
    # sensing
    effective_bandwidth: float = 10e6
    beamwidth: float = 0.5
    beta1: float = 1e6
    beta2: float = 1.0
    varpi1: float = 1.0
    varpi2: float = 1.0
    # objective
    theta1: float = 0.5
    theta2: Optional[float] = None
    rho_min: float = 0.0
    r_min: float = 0.0
    comm_power_fraction: float = 0.5
    distance_exponent: int = 2
    literal_c5: bool = False
    # randomness / discretization
    rng_seed: int = 0
    sample_count: int = 10_000
    sensing_error_std: float = 1.0
    # solver controls
    T1: int = 20
    T2: int = 500
    T3: int = 10
    tol_grad: float = 1e-5
    tol_outer: float = 1e-4
    step_base: float = 0.1
    max_doublings: int = 30

    def __post_init__(self):
        if self.M < 1 or self.K < 1 or self.N < 1:
            raise ConfigError("M, K and N must be >= 1")
        if not self.p_min < self.p_max:
            raise ConfigError("p_min must be below p_max")
        if not 0.0 <= self.theta1 <= 1.0:
            raise ConfigError("theta1 must lie in [0, 1]")
        if self.theta2 is not None and self.theta2 <= 0:
            raise ConfigError("theta2 must be positive")
        if self.sample_count < 1:
            raise ConfigError("sample_count must be >= 1")
        if self.carrier_frequency <= 0:
            raise ConfigError("carrier frequency must be positive")
        if self.distance_exponent not in (1, 2):
            raise ConfigError("distance_exponent must be 1 or 2")
        if not 0.0 < self.comm_power_fraction < 1.0:
            raise ConfigError("comm_power_fraction must lie in (0, 1)")
        for name in ("effective_bandwidth", "beamwidth", "beta1", "beta2", "varpi1", "varpi2"):
            if getattr(self, name) < 0 or (name not in ("varpi1", "varpi2") and getattr(self, name) == 0):
                raise ConfigError(f"{name} must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        kw: dict[str, Any] = {}
        for key, value in raw.items():
            if key in _DBM_KEYS:
                kw[_DBM_KEYS[key]] = dbm_to_watt(float(value))
            elif key in _DB_KEYS:
                kw[_DB_KEYS[key]] = db_to_linear(float(value))
            elif key in known:
                if key in ("bs_positions", "uav_positions", "region_min", "region_max") and value is not None:
                    value = _freeze(value)
                kw[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            return cls(**kw)
        except TypeError as exc:  # pragma: no cover - defensive
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key in ("bs_positions", "uav_positions", "region_min", "region_max"):
            if out[key] is not None:
                out[key] = json.loads(json.dumps(out[key]))
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _freeze(v):
    if isinstance(v, (list, tuple)):
        return tuple(_freeze(x) for x in v)
    return float(v)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be an object: {path}")
    return ScenarioConfig.from_dict(raw)


def desk_config(**overrides) -> ScenarioConfig:
    """The small pinned scenario used by the acceptance suite."""
    base = dict(M=3, K=6, N=1, sample_count=10_000, rng_seed=7)
    base.update(overrides)
    return ScenarioConfig(**base)


def density_from_config(cfg: ScenarioConfig) -> SpatialDensity:
    spec = dict(cfg.density)
    kind = spec.get("kind", "uniform")
    lower = np.asarray(cfg.region_min, float)
    upper = np.asarray(cfg.region_max, float)
    if kind == "uniform":
        return SpatialDensity(lower, upper)
    return SpatialDensity(
        lower,
        upper,
        kind=kind,
        means=np.asarray(spec["means"], float).reshape(-1, 3),
        stds=np.asarray(spec["stds"], float),
        weights=np.asarray(spec["weights"], float),
    )


# --------------------------------------------------------------------------
# assembled scenario
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """A fully instantiated single-slot scenario.

    Link arrays are indexed ``[uav, bs]``; UAV ``K`` (the last one) is
    the non-cooperative target.
    """

    config: ScenarioConfig
    base_stations: tuple
    uavs: tuple
    density: SpatialDensity
    cloud: SamplePointCloud
    true_distance: np.ndarray
    delta_d: np.ndarray
    phase: np.ndarray
    azimuth: np.ndarray
    elevation: np.ndarray
    theta2: Optional[float] = None

    @property
    def M(self) -> int:
        return len(self.base_stations)

    @property
    def K(self) -> int:
        return len(self.uavs) - 1

    @property
    def noncoop(self) -> int:
        return self.K

    @property
    def bs_positions(self) -> np.ndarray:
        return np.array([b.position for b in self.base_stations])

    @property
    def uav_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.uavs])

    @property
    def estimated_distance(self) -> np.ndarray:
        return self.true_distance - self.delta_d

    def with_theta2(self, theta2: float) -> "Scenario":
        return dataclasses.replace(self, theta2=float(theta2))


def default_bs_positions(cfg: ScenarioConfig) -> np.ndarray:
    lo = np.asarray(cfg.region_min, float)
    hi = np.asarray(cfg.region_max, float)
    cx, cy = (lo[:2] + hi[:2]) / 2.0
    if cfg.M == 1:
        return np.array([[cx, cy, cfg.bs_height]])
    ang = np.pi / 2 + 2 * np.pi * np.arange(cfg.M) / cfg.M
    return np.column_stack([
        cx + cfg.bs_radius * np.cos(ang),
        cy + cfg.bs_radius * np.sin(ang),
        np.full(cfg.M, cfg.bs_height),
    ])


def draw_sensing_errors(true_distance: np.ndarray, std: float, rng: np.random.Generator,
                        floor: float = 0.1) -> np.ndarray:
    """Zero-mean Gaussian ranging error, resampled until d - dd > floor."""
    dd = std * rng.standard_normal(true_distance.shape)
    bad = true_distance - dd <= floor
    while np.any(bad):
        dd[bad] = std * rng.standard_normal(int(bad.sum()))
        bad = true_distance - dd <= floor
    return dd


def build_scenario(cfg: ScenarioConfig, seed: Optional[int] = None,
                   cloud: Optional[SamplePointCloud] = None,
                   uav_positions: Optional[np.ndarray] = None, slot: int = 0) -> Scenario:
    """Instantiate geometry and draw every random quantity from ``seed``.

    Slots share the point cloud; UAV positions and link perturbations of
    slot ``n > 0`` come from their own seed stream.
    """
    seed = cfg.rng_seed if seed is None else seed
    ss_cloud, ss_uav, ss_link = np.random.SeedSequence(seed).spawn(3)
    if slot:
        _, ss_uav, ss_link = np.random.SeedSequence([seed, slot]).spawn(3)
    density = density_from_config(cfg)

    if cloud is None:
        cloud = SamplePointCloud(density.sample(cfg.sample_count, np.random.default_rng(ss_cloud)), seed)

    bs_pos = (np.asarray(cfg.bs_positions, float).reshape(-1, 3)
              if cfg.bs_positions is not None else default_bs_positions(cfg))
    if len(bs_pos) != cfg.M:
        raise ConfigError(f"expected {cfg.M} base station positions, got {len(bs_pos)}")

    if uav_positions is None:
        if cfg.uav_positions is not None:
            uav_positions = np.asarray(cfg.uav_positions, float).reshape(-1, 3)
        else:
            uav_positions = density.sample(cfg.K + 1, np.random.default_rng(ss_uav))
    uav_positions = np.asarray(uav_positions, float)
    if uav_positions.shape != (cfg.K + 1, 3):
        raise ConfigError(f"expected {cfg.K + 1} UAV positions (K cooperative + 1 non-cooperative)")

    lam = cfg.wavelength
    elements = planar_array(cfg.antenna_rows, cfg.antenna_cols, lam / 2.0)
    base_stations = tuple(
        BaseStation(m, as_vec3(p), elements, cfg.total_power, cfg.bandwidth)
        for m, p in enumerate(bs_pos)
    )
    uavs = tuple(
        UavNode(j, as_vec3(p), UavKind.NON_COOPERATIVE if j == cfg.K else UavKind.COOPERATIVE)
        for j, p in enumerate(uav_positions)
    )

    az, el, dist = departure_angles_many(bs_pos, uav_positions)
    rng = np.random.default_rng(ss_link)
    delta_d = draw_sensing_errors(dist, cfg.sensing_error_std, rng)
    phase = rng.uniform(0.0, 2 * np.pi, size=dist.shape)

    return Scenario(
        config=cfg,
        base_stations=base_stations,
        uavs=uavs,
        density=density,
        cloud=cloud,
        true_distance=dist,
        delta_d=delta_d,
        phase=phase,
        azimuth=az,
        elevation=el,
        theta2=cfg.theta2,
    )
