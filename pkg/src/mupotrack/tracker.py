"""Online sliding-window pipeline: IMM update, T-FoT fit, raster assembly,
network detection, and confidence-weighted fusion."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import ConvertedMeasurement, PolarMeasurement, RadarParams, mucm_convert, snr_to_polar_sigma
from .imm import ImmConfig, ImmEstimate, imm_step, init_from_measurements
from .raster import RasterConfig, assemble
from .tfot import DEFAULT_GAMMA, DEFAULT_LAMBDA, fit_tfot
from .detector.net import MupoNet, decode, forward_grid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackerConfig:
    raster: RasterConfig = field(default_factory=RasterConfig)
    imm: ImmConfig = field(default_factory=ImmConfig)
    radar: RadarParams = field(default_factory=lambda: RadarParams(range_coeff=150.0, azimuth_coeff=0.02))
    gamma: int = DEFAULT_GAMMA
    lam: float = DEFAULT_LAMBDA
    threshold: float = 0.5
    warmup_s: float = 10.0

    def __post_init__(self):
        if self.raster.length < 2:
            raise ValueError("tracker needs a window of at least 2 measurements")


@dataclass(frozen=True)
class TrackEstimate:
    t: float
    x: float
    y: float
    vx: float
    vy: float
    source: str            # fused | imm-only | init
    conf: float


@dataclass(frozen=True)
class TrackerState:
    imm: ImmEstimate
    history: tuple         # last <= L combined IMM estimates


def convert_measurement(z: PolarMeasurement, radar: RadarParams) -> ConvertedMeasurement:
    sigma_rho, sigma_theta = snr_to_polar_sigma(z.snr, radar)
    return mucm_convert(z, sigma_rho, sigma_theta)


def _estimate_from_imm(imm: ImmEstimate, source: str, conf: float) -> TrackEstimate:
    return TrackEstimate(
        t=imm.t, x=float(imm.x[0]), y=float(imm.x[2]),
        vx=float(imm.x[1]), vy=float(imm.x[3]),
        source=source, conf=conf,
    )


def track_step(window, state: TrackerState, net: MupoNet, cfg: TrackerConfig):
    """One tick on a full window of L polar measurements.

    Returns (TrackEstimate, new TrackerState). Raster/network stage failures
    degrade to the IMM estimate with a logged reason.
    """
    if len(window) != cfg.raster.length:
        raise ValueError("window length mismatch")
    converted = [convert_measurement(z, cfg.radar) for z in window]
    dt = window[-1].t - window[-2].t
    imm = imm_step(state.imm, converted[-1], dt, cfg.imm)
    history = (state.history + (imm,))[-cfg.raster.length:]
    new_state = TrackerState(imm=imm, history=history)

    try:
        fit = fit_tfot(converted, cfg.gamma, cfg.lam)
        tensor = assemble(
            converted, history, fit, cfg.raster, cfg.radar,
            snr_ref=window[-1].snr, rho_ref=window[-1].rho,
        )
        grid = forward_grid(net, tensor)
        det = decode(grid, cfg.threshold)
    except Exception as exc:
        log.warning("raster/detection stage failed at t=%.3f: %s", window[-1].t, exc)
        return _estimate_from_imm(imm, "imm-only", 1.0), new_state

    if det is None:
        return _estimate_from_imm(imm, "imm-only", 1.0), new_state

    c = min(max(det.confidence, 0.0), 1.0)
    px, py = imm.position
    fused_x = (1.0 - c) * det.position[0] + c * float(px)
    fused_y = (1.0 - c) * det.position[1] + c * float(py)
    est = TrackEstimate(
        t=imm.t, x=fused_x, y=fused_y,
        vx=float(imm.x[1]), vy=float(imm.x[3]),
        source="fused", conf=c,
    )
    return est, new_state


def iter_window_tensors(measurements, cfg: TrackerConfig):
    """Yield (tick_index, tensor, imm, converted_window) for every full window.

    Mirrors run_track's stepping exactly (two-point init, per-tick IMM) so
    dataset tensors match what the tracker sees at inference.
    """
    length = cfg.raster.length
    if len(measurements) < length + 1:
        raise ValueError(f"need at least {length + 1} measurements")
    z1 = convert_measurement(measurements[0], cfg.radar)
    z2 = convert_measurement(measurements[1], cfg.radar)
    imm = init_from_measurements(z1, z2, cfg.imm)
    history = (imm,)
    converted = [z1, z2]
    for k in range(2, len(measurements)):
        converted.append(convert_measurement(measurements[k], cfg.radar))
        dt = measurements[k].t - measurements[k - 1].t
        imm = imm_step(imm, converted[k], dt, cfg.imm)
        history = (history + (imm,))[-length:]
        if k >= length - 1:
            window = converted[k - length + 1 : k + 1]
            fit = fit_tfot(window, cfg.gamma, cfg.lam)
            tensor = assemble(
                window, history, fit, cfg.raster, cfg.radar,
                snr_ref=measurements[k].snr, rho_ref=measurements[k].rho,
            )
            yield k, tensor, imm, window


def run_track(measurements, net: MupoNet, cfg: TrackerConfig):
    """Track a full measurement sequence; exactly one estimate per tick.

    The first L-1 ticks are init-source (converted measurement, then the
    two-point initialized IMM); every later tick runs the full pipeline.
    """
    length = cfg.raster.length
    if len(measurements) < length + 1:
        raise ValueError(f"need at least {length + 1} measurements")
    out = []
    z1 = convert_measurement(measurements[0], cfg.radar)
    out.append(TrackEstimate(t=z1.t, x=z1.x, y=z1.y, vx=0.0, vy=0.0, source="init", conf=0.0))
    z2 = convert_measurement(measurements[1], cfg.radar)
    imm0 = init_from_measurements(z1, z2, cfg.imm)
    state = TrackerState(imm=imm0, history=(imm0,))
    out.append(_estimate_from_imm(imm0, "init", 0.0))
    for k in range(2, len(measurements)):
        if k < length - 1:
            zc = convert_measurement(measurements[k], cfg.radar)
            dt = measurements[k].t - measurements[k - 1].t
            imm = imm_step(state.imm, zc, dt, cfg.imm)
            state = TrackerState(imm=imm, history=(state.history + (imm,))[-length:])
            out.append(_estimate_from_imm(imm, "init", 0.0))
        else:
            window = measurements[k - length + 1 : k + 1]
            est, state = track_step(window, state, net, cfg)
            out.append(est)
    return out
