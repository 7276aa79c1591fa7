"""Coordinate systems, SNR-driven noise laws, and the MUCM polar->Cartesian conversion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PSD_JITTER = 1e-6  # m^2, added to degenerate converted covariances


def wrap_angle(theta):
    """Normalize an angle to (-pi, pi]."""
    out = math.fmod(theta + math.pi, 2.0 * math.pi)
    if out <= 0.0:
        out += 2.0 * math.pi
    return out - math.pi


@dataclass(frozen=True)
class RadarParams:
    """Two-coefficient radar noise model.

    range_coeff absorbs c/(2B) and azimuth_coeff absorbs theta_3dB/1.6, so the
    sigma laws are plain equalities in 1/sqrt(2*SNR).
    """

    range_coeff: float          # m * sqrt(ratio)
    azimuth_coeff: float        # rad * sqrt(ratio)
    reference_snr: float = 100.0
    reference_range: float = 200e3

    def __post_init__(self):
        for name in ("range_coeff", "azimuth_coeff", "reference_snr", "reference_range"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"RadarParams.{name} must be positive")


@dataclass(frozen=True)
class PolarMeasurement:
    rho: float      # m
    theta: float    # rad, (-pi, pi]
    snr: float      # linear power ratio
    t: float        # s

    def __post_init__(self):
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")
        if self.snr <= 0.0:
            raise ValueError("snr must be positive")


@dataclass(frozen=True)
class ConvertedMeasurement:
    """MUCM Cartesian pseudo-measurement with its 2x2 covariance."""

    x: float
    y: float
    cov: np.ndarray
    t: float
    jittered: bool = field(default=False, compare=False)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


def snr_to_polar_sigma(snr, params: RadarParams):
    """(sigma_rho, sigma_theta) at a realized linear SNR."""
    if snr <= 0.0:
        raise ValueError("snr must be positive")
    scale = 1.0 / math.sqrt(2.0 * snr)
    return params.range_coeff * scale, params.azimuth_coeff * scale


def propagate_snr(snr_ref, rho_ref, rho):
    """Mean SNR at range rho given a reference, fourth-power radar-equation law."""
    if snr_ref <= 0.0 or rho_ref <= 0.0 or rho <= 0.0:
        raise ValueError("snr_ref, rho_ref, rho must all be positive")
    r = rho_ref / rho
    return snr_ref * r * r * r * r


def _mucm_cov_entries(rho, theta, sigma_rho, sigma_theta):
    # Element formulas for the converted covariance. The common factor
    # (rho^2 + sigma_rho^2)/2 multiplies the double-angle terms.
    e1 = math.exp(-sigma_theta * sigma_theta)
    e2 = e1 * e1
    c = math.cos(theta)
    s = math.sin(theta)
    c2 = math.cos(2.0 * theta)
    s2 = math.sin(2.0 * theta)
    half = 0.5 * (rho * rho + sigma_rho * sigma_rho)
    rho2 = rho * rho
    var_x = half * (1.0 + c2 * e2) - e1 * rho2 * c * c
    var_y = half * (1.0 - c2 * e2) - e1 * rho2 * s * s
    cov_xy = half * s2 * e2 - e1 * rho2 * c * s
    return var_x, var_y, cov_xy


def mucm_convert(z: PolarMeasurement, sigma_rho, sigma_theta) -> ConvertedMeasurement:
    """Unbiased conversion of a polar measurement to Cartesian.

    The multiplicative bias compensation is lam = exp(-sigma_theta^2/2); the
    returned covariance is exact for Gaussian polar noise. If the matrix comes
    out numerically non-PD (extreme SNR), PSD_JITTER * I is added and the
    result is flagged.
    """
    if not sigma_theta * sigma_theta < 1.0:
        raise ValueError("sigma_theta^2 must be < 1 (small-angle regime)")
    lam_inv = math.exp(0.5 * sigma_theta * sigma_theta)
    x = lam_inv * z.rho * math.cos(z.theta)
    y = lam_inv * z.rho * math.sin(z.theta)
    var_x, var_y, cov_xy = _mucm_cov_entries(z.rho, z.theta, sigma_rho, sigma_theta)
    cov = np.array([[var_x, cov_xy], [cov_xy, var_y]])  # upper copied to lower
    jittered = False
    # PD check via the 2x2 criterion: positive diagonal and positive determinant
    det = var_x * var_y - cov_xy * cov_xy
    if var_x <= 0.0 or var_y <= 0.0 or det <= 0.0:
        cov = cov + PSD_JITTER * np.eye(2)
        jittered = True
    return ConvertedMeasurement(x=x, y=y, cov=cov, t=z.t, jittered=jittered)


def linearized_cartesian_cov(rho, theta, sigma_rho, sigma_theta) -> np.ndarray:
    """First-order converted covariance A diag(sr^2, st^2) A^T, cross-check for MUCM."""
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    c = math.cos(theta)
    s = math.sin(theta)
    a = np.array([[c, -rho * s], [s, rho * c]])
    d = np.diag([sigma_rho * sigma_rho, sigma_theta * sigma_theta])
    return a @ d @ a.T


def polar_of(x, y):
    """(rho, theta) of a Cartesian point; theta in (-pi, pi]."""
    return math.hypot(x, y), wrap_angle(math.atan2(y, x))
