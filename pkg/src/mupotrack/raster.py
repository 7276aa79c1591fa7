"""MUPO rasterization: project a measurement window into the target state space.

Every channel is a sum of unit-peak Gaussian kernels evaluated at pixel
centers; the normalization constant alpha = 2*pi*|Sigma|^(1/2) exactly cancels
the Gaussian denominator, so kernels are rendered directly in exponential form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    ConvertedMeasurement,
    RadarParams,
    _mucm_cov_entries,
    polar_of,
    propagate_snr,
    snr_to_polar_sigma,
)
from .tfot import sample_tfot

CHANNEL_NAMES = ("measurement-sequence", "imm", "tfot", "latest")
DEFAULT_STRIDE = 32
DEFAULT_L = 4
DEFAULT_SIZE = 128


@dataclass(frozen=True)
class RasterRegion:
    x0: float          # world x of pixel (0,0) center
    y0: float
    cell: float        # m/pixel
    height: int
    width: int

    def __post_init__(self):
        if self.cell <= 0.0:
            raise ValueError("cell must be positive")
        if self.height <= 0 or self.width <= 0:
            raise ValueError("region dims must be positive")

    def world_to_pixel(self, p):
        """(x, y) meters -> float (row, col); out-of-region points allowed."""
        return (p[1] - self.y0) / self.cell, (p[0] - self.x0) / self.cell

    def pixel_to_world(self, rc):
        return self.x0 + rc[1] * self.cell, self.y0 + rc[0] * self.cell

    def contains_pixel(self, rc):
        return -0.5 <= rc[0] < self.height - 0.5 and -0.5 <= rc[1] < self.width - 0.5


@dataclass(frozen=True)
class MupoTensor:
    region: RasterRegion
    channels: np.ndarray           # (4, H, W) float32
    t_window: tuple                # (t_k1, ..., t_kL)

    def __post_init__(self):
        if self.channels.shape[0] != len(CHANNEL_NAMES):
            raise ValueError("expected 4 channels")
        if self.channels.shape[1:] != (self.region.height, self.region.width):
            raise ValueError("channel shape does not match region")

    def channel(self, name: str) -> np.ndarray:
        return self.channels[CHANNEL_NAMES.index(name)]


def sigma_bounds(cov: np.ndarray):
    """(sqrt of min eigenvalue, sqrt of max eigenvalue) of a 2x2 covariance."""
    w = np.linalg.eigvalsh(cov)
    return math.sqrt(max(w[0], 0.0)), math.sqrt(max(w[1], 0.0))


def normalized_gaussian_plane(region: RasterRegion, mean, cov: np.ndarray) -> np.ndarray:
    """Unit-peak Gaussian kernel over the region's pixel centers."""
    a, b, c = cov[0, 0], cov[0, 1], cov[1, 1]
    det = a * c - b * b
    if a <= 0.0 or c <= 0.0 or det <= 0.0:
        raise ValueError("covariance must be positive definite")
    ia, ib, ic = c / det, -b / det, a / det
    # base offsets keep the plane bitwise invariant under joint translation
    dx = (region.x0 - mean[0]) + np.arange(region.width) * region.cell
    dy = (region.y0 - mean[1]) + np.arange(region.height) * region.cell
    quad = (
        ia * dx[None, :] ** 2
        + 2.0 * ib * dy[:, None] * dx[None, :]
        + ic * dy[:, None] ** 2
    )
    return np.exp(-0.5 * quad)


def _max_sigma(window):
    return max(sigma_bounds(z.cov)[1] for z in window)


def build_region_fixed(window, v_max: float, cell: float = None, stride: int = DEFAULT_STRIDE,
                       margin: float = None, size: int = None) -> RasterRegion:
    """Square region centered at the oldest converted measurement.

    Half-extent is v_max * window-span + margin (margin defaults to 3 sigma of
    the widest measurement). Give cell to fix the resolution (dims rounded up
    to the stride), or size to fix the pixel dims (cell adapts per window).
    """
    if len(window) < 1:
        raise ValueError("window must hold at least one measurement")
    if (cell is None) == (size is None):
        raise ValueError("give exactly one of cell or size")
    span = window[-1].t - window[0].t
    if margin is None:
        margin = 3.0 * _max_sigma(window)
    half = v_max * span + margin
    cx, cy = window[0].x, window[0].y
    if cell is not None:
        n = int(math.ceil(2.0 * half / cell))
        n = int(math.ceil(n / stride)) * stride
    else:
        if size % stride != 0:
            raise ValueError("size must be a multiple of the stride")
        n = size
        cell = 2.0 * half / n
    x0 = cx - (n - 1) / 2.0 * cell
    y0 = cy - (n - 1) / 2.0 * cell
    return RasterRegion(x0=x0, y0=y0, cell=cell, height=n, width=n)


def build_region_flexible(window, k_sigma: float = 3.0, cell: float = None,
                          stride: int = DEFAULT_STRIDE) -> RasterRegion:
    """Bounding box of the window means, padded by k_sigma of the widest
    measurement per side; cell defaults to sigma_min/3 clamped to [5, 100] m."""
    if len(window) < 1:
        raise ValueError("window must hold at least one measurement")
    sig_max = _max_sigma(window)
    if cell is None:
        sig_min = min(sigma_bounds(z.cov)[0] for z in window)
        cell = min(max(sig_min / 3.0, 5.0), 100.0)
    xs = np.array([z.x for z in window])
    ys = np.array([z.y for z in window])
    pad = k_sigma * sig_max
    w_extent = (xs.max() - xs.min()) + 2.0 * pad
    h_extent = (ys.max() - ys.min()) + 2.0 * pad
    nw = int(math.ceil(max(w_extent / cell, 1.0) / stride)) * stride
    nh = int(math.ceil(max(h_extent / cell, 1.0) / stride)) * stride
    # symmetric expansion keeps the box center fixed while rounding
    cx = 0.5 * (xs.min() + xs.max())
    cy = 0.5 * (ys.min() + ys.max())
    x0 = cx - (nw - 1) / 2.0 * cell
    y0 = cy - (nh - 1) / 2.0 * cell
    return RasterRegion(x0=x0, y0=y0, cell=cell, height=nh, width=nw)


def render_sequence_channel(region: RasterRegion, window) -> np.ndarray:
    plane = np.zeros((region.height, region.width))
    for z in window:
        plane += normalized_gaussian_plane(region, (z.x, z.y), z.cov)
    return plane


def star_covariance(x: float, y: float, snr_ref: float, rho_ref: float, radar: RadarParams) -> np.ndarray:
    """Covariance for an estimated point, rebuilt from SNR propagated to its range."""
    rho, theta = polar_of(x, y)
    snr = propagate_snr(snr_ref, rho_ref, rho)
    sigma_rho, sigma_theta = snr_to_polar_sigma(snr, radar)
    var_x, var_y, cov_xy = _mucm_cov_entries(rho, theta, sigma_rho, sigma_theta)
    cov = np.array([[var_x, cov_xy], [cov_xy, var_y]])
    det = var_x * var_y - cov_xy * cov_xy
    if var_x <= 0.0 or var_y <= 0.0 or det <= 0.0:
        cov = cov + 1e-6 * np.eye(2)
    return cov


def render_aux_channels(region: RasterRegion, imm_history, tfot_samples,
                        latest: ConvertedMeasurement, radar: RadarParams,
                        snr_ref: float, rho_ref: float):
    """(imm, tfot, latest) planes; the first two rebuild their covariances from
    the propagated SNR at each point's range."""
    imm_plane = np.zeros((region.height, region.width))
    for est in imm_history:
        px, py = float(est.x[0]), float(est.x[2])
        cov = star_covariance(px, py, snr_ref, rho_ref, radar)
        imm_plane += normalized_gaussian_plane(region, (px, py), cov)
    tfot_plane = np.zeros((region.height, region.width))
    for _, px, py in tfot_samples:
        cov = star_covariance(px, py, snr_ref, rho_ref, radar)
        tfot_plane += normalized_gaussian_plane(region, (px, py), cov)
    latest_plane = normalized_gaussian_plane(region, (latest.x, latest.y), latest.cov)
    return imm_plane, tfot_plane, latest_plane


@dataclass(frozen=True)
class RasterConfig:
    mode: str = "fixed"            # fixed | flexible
    length: int = DEFAULT_L        # window length L
    v_max: float = 300.0
    cell: float = None             # fixed mode: explicit resolution
    size: int = DEFAULT_SIZE       # fixed mode: pixel dims when cell is None
    margin: float = None           # fixed mode: None -> 3 sigma per window
    k_sigma: float = 3.0           # flexible mode padding
    flex_cell: float = None        # flexible mode: explicit cell override
    stride: int = DEFAULT_STRIDE
    n_samples: int = None          # T-FoT samples; None -> 4 * length

    def __post_init__(self):
        if self.mode not in ("fixed", "flexible"):
            raise ValueError("mode must be fixed or flexible")
        if self.length < 1:
            raise ValueError("window length must be >= 1")

    @property
    def n_s(self):
        return self.n_samples if self.n_samples is not None else 4 * self.length


def build_region(window, cfg: RasterConfig) -> RasterRegion:
    if cfg.mode == "fixed":
        return build_region_fixed(
            window, cfg.v_max, cell=cfg.cell, stride=cfg.stride,
            margin=cfg.margin, size=None if cfg.cell is not None else cfg.size,
        )
    return build_region_flexible(window, k_sigma=cfg.k_sigma, cell=cfg.flex_cell, stride=cfg.stride)


def assemble(window, imm_history, tfot_fit, cfg: RasterConfig,
             radar: RadarParams, snr_ref: float, rho_ref: float) -> MupoTensor:
    """Render the four channels {measurement-sequence, imm, tfot, latest}."""
    if len(window) != cfg.length:
        raise ValueError(f"window length {len(window)} != configured {cfg.length}")
    region = build_region(window, cfg)
    seq = render_sequence_channel(region, window)
    samples = sample_tfot(tfot_fit, cfg.n_s)
    imm_plane, tfot_plane, latest_plane = render_aux_channels(
        region, imm_history, samples, window[-1], radar, snr_ref, rho_ref
    )
    channels = np.stack([seq, imm_plane, tfot_plane, latest_plane]).astype(np.float32)
    return MupoTensor(region=region, channels=channels, t_window=tuple(z.t for z in window))
