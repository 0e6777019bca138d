"""Sensing channel gain, CRB proxies and the localization QoS."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import link_bandwidth
from .errors import ConfigError, DegenerateGeometry, InfiniteCrb
from .scenario import Scenario


@dataclass(frozen=True)
class SensingParams:
    effective_bandwidth: float
    beamwidth: float
    beta1: float = 1.0
    beta2: float = 1.0
    varpi1: float = 1.0
    varpi2: float = 1.0

    @classmethod
    def from_config(cls, cfg) -> "SensingParams":
        return cls(cfg.effective_bandwidth, cfg.beamwidth, cfg.beta1, cfg.beta2,
                   cfg.varpi1, cfg.varpi2)

    def qos_per_gain(self, bandwidth):
        """rho / (p_s |varsigma|^2) for a target with the given bandwidth share."""
        return self.varpi1 * bandwidth / self.beta1 + self.varpi2 / self.beta2


@dataclass(frozen=True)
class SensingLink:
    target: int
    gain: float  # |varsigma|
    power: float
    bandwidth: float


@dataclass(frozen=True)
class CrbEstimate:
    crb_distance: float
    crb_angle: float
    rho: float = float("nan")


def composite_gain(bs, uav, wavelength: float, reference_gain: float = 1.0) -> float:
    d = float(np.linalg.norm(np.asarray(bs, float) - np.asarray(uav, float)))
    if d == 0.0:
        raise DegenerateGeometry("base station and UAV coincide")
    return float(np.sqrt(reference_gain) * wavelength / (4 * np.pi * d))


def crb(link: SensingLink, params: SensingParams) -> CrbEstimate:
    if link.power <= 0:
        raise InfiniteCrb(f"target {link.target} has no sensing power")
    snr = link.power * link.gain**2
    return CrbEstimate(1.0 / (snr * params.effective_bandwidth**2), 1.0 / (snr * params.beamwidth))


def localization_qos(link: SensingLink, params: SensingParams) -> float:
    if link.power < 0:
        raise ValueError("sensing power must be nonnegative")
    return link.power * link.gain**2 * params.qos_per_gain(link.bandwidth)


def rho_sum(links: Sequence[SensingLink], params: SensingParams, n_targets: int) -> float:
    seen = {lk.target for lk in links}
    missing = set(range(n_targets)) - seen
    if missing:
        raise ConfigError(f"targets without a sensing link: {sorted(missing)}")
    return float(sum(localization_qos(lk, params) for lk in links))


# --------------------------------------------------------------------------
# vectorized forms
# --------------------------------------------------------------------------

def gain_squared(scenario: Scenario, association: np.ndarray) -> np.ndarray:
    """|varsigma|^2 for every UAV towards its serving station."""
    cfg = scenario.config
    j = np.arange(scenario.K + 1)
    d = scenario.true_distance[j, association]
    return cfg.reference_gain * (cfg.wavelength / (4 * np.pi * d)) ** 2


def qos_coefficients(scenario: Scenario, association: np.ndarray) -> np.ndarray:
    """rho_j per watt of sensing power, for all K + 1 targets."""
    params = SensingParams.from_config(scenario.config)
    return gain_squared(scenario, association) * params.qos_per_gain(
        link_bandwidth(scenario, association))


def crb_many(scenario: Scenario, association: np.ndarray, p_s: np.ndarray):
    """(crb_distance, crb_angle) arrays over all targets."""
    params = SensingParams.from_config(scenario.config)
    snr = np.asarray(p_s, float) * gain_squared(scenario, association)
    with np.errstate(divide="ignore"):
        return 1.0 / (snr * params.effective_bandwidth**2), 1.0 / (snr * params.beamwidth)
