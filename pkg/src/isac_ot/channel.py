"""Antenna responses, estimated channels, link SNR and the cooperative sum rate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateGeometry, PerfectSensing
from .scenario import SPEED_OF_LIGHT, Scenario


@dataclass(frozen=True)
class LinkGeometry:
    true_distance: float
    sensing_error: float  # d - d_hat
    azimuth: float
    elevation: float
    phase: float = 0.0

    def __post_init__(self):
        if self.true_distance <= 0:
            raise DegenerateGeometry("true distance must be positive")
        if self.estimated_distance <= 0:
            raise DegenerateGeometry("estimated distance must be positive")

    @property
    def estimated_distance(self) -> float:
        return self.true_distance - self.sensing_error


@dataclass(frozen=True)
class CommLink:
    geometry: LinkGeometry
    response: np.ndarray
    beamformer: np.ndarray
    bandwidth: float
    associated: int = 1

    @classmethod
    def matched(cls, geometry: LinkGeometry, elements, wavelength: float,
                bandwidth: float, associated: int = 1) -> "CommLink":
        """Link with the matched-filter beamformer w = a / |a|."""
        a = antenna_response(elements, geometry.azimuth, geometry.elevation, wavelength)
        return cls(geometry, a, a / np.linalg.norm(a), bandwidth, associated)


def wave_vector(az: float, el: float, wavelength: float) -> np.ndarray:
    return (2 * np.pi / wavelength) * np.array(
        [np.sin(el) * np.cos(az), np.sin(el) * np.sin(az), np.cos(el)]
    )


def antenna_response(elements, az: float, el: float, wavelength: float) -> np.ndarray:
    """Unit-modulus array response exp(j <element, kappa>)."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    elements = np.atleast_2d(np.asarray(elements, float))
    if elements.size == 0:
        raise ValueError("need at least one antenna element")
    return np.exp(1j * (elements @ wave_vector(az, el, wavelength)))


def estimated_channel(link: CommLink, wavelength: float) -> np.ndarray:
    g = link.geometry
    eff = g.estimated_distance + g.sensing_error
    if eff <= 0:
        raise DegenerateGeometry("nonpositive effective distance")
    return wavelength * np.exp(1j * g.phase) / (4 * np.pi * eff) * link.response


def channel_error(link: CommLink, wavelength: float) -> np.ndarray:
    g = link.geometry
    if g.sensing_error == 0:
        raise PerfectSensing("zero sensing error: use a zero error channel")
    return wavelength * np.exp(1j * g.phase) * link.response / (4 * np.pi * g.sensing_error)


def link_snr(link: CommLink, p_c: float, noise_psd: float, wavelength: float,
             distance_exponent: int = 2) -> float:
    """Receive SNR; noise power is noise_psd times the link bandwidth."""
    if p_c < 0:
        raise ValueError("communication power must be nonnegative")
    if not link.associated:
        return 0.0
    g = link.geometry
    d = g.estimated_distance + g.sensing_error
    beam = abs(np.vdot(link.response, link.beamformer)) ** 2
    return (p_c * wavelength**2 * beam
            / (16 * np.pi**2 * noise_psd * link.bandwidth * d**distance_exponent))


def sum_rate(links: Sequence[CommLink], powers, noise_psd: float, wavelength: float,
             distance_exponent: int = 2):
    """Per-link Shannon rates (bit/s) and their total for one slot."""
    rates = np.array([
        lk.bandwidth * np.log2(1.0 + link_snr(lk, p, noise_psd, wavelength, distance_exponent))
        for lk, p in zip(links, powers)
    ])
    return rates, float(rates.sum())


def echo_delay(bs, uav) -> float:
    d = float(np.linalg.norm(np.asarray(bs, float) - np.asarray(uav, float)))
    if d == 0.0:
        raise DegenerateGeometry("base station and UAV coincide")
    return d / SPEED_OF_LIGHT


# --------------------------------------------------------------------------
# vectorized forms over a whole scenario
# --------------------------------------------------------------------------

def coop_counts(scenario: Scenario, association: np.ndarray) -> np.ndarray:
    """Number of cooperative UAVs served by each base station."""
    return np.bincount(association[: scenario.K], minlength=scenario.M)


def link_bandwidth(scenario: Scenario, association: np.ndarray) -> np.ndarray:
    """Per-UAV bandwidth: each station splits its band among its cooperative users."""
    counts = np.maximum(coop_counts(scenario, association), 1)
    total = np.array([b.total_bandwidth for b in scenario.base_stations])
    return (total / counts)[association]


def beam_gain(scenario: Scenario, uav: int, bs: int) -> float:
    """|a^H w|^2 for the matched beamformer of one link (equals n_t)."""
    st = scenario.base_stations[bs]
    a = antenna_response(st.antenna_elements, scenario.azimuth[uav, bs],
                         scenario.elevation[uav, bs], scenario.config.wavelength)
    return float(np.linalg.norm(a) ** 2)


def unit_power_snr(scenario: Scenario, association: np.ndarray,
                   bandwidth: Optional[np.ndarray] = None) -> np.ndarray:
    """SNR per watt for every cooperative UAV on its serving link."""
    cfg = scenario.config
    K = scenario.K
    if bandwidth is None:
        bandwidth = link_bandwidth(scenario, association)
    serving = association[:K]
    # estimated + error distance is the true distance
    d = scenario.estimated_distance[np.arange(K), serving] + scenario.delta_d[np.arange(K), serving]
    n_t = np.array([scenario.base_stations[m].n_t for m in serving], dtype=float)
    return (cfg.wavelength**2 * n_t
            / (16 * np.pi**2 * cfg.noise_psd * bandwidth[:K] * d**cfg.distance_exponent))


def cooperative_rates(scenario: Scenario, association: np.ndarray, p_c: np.ndarray) -> np.ndarray:
    b = link_bandwidth(scenario, association)
    g = unit_power_snr(scenario, association, b)
    return b[: scenario.K] * np.log2(1.0 + g * p_c)
