"""TEP label assignment for one MUPO tensor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..raster import RasterRegion
from .net import NetConfig


@dataclass(frozen=True)
class TepLabels:
    """Desired per-TEP outputs for one training sample.

    Offsets live in the positive TEPs' local frames in stride units; the 3x3
    neighborhood makes them span (-1, 2). truth_tep is the global truth in
    TEP-grid coordinates (row, col), the regression target after adding i^m.
    """

    p: np.ndarray            # (H', W') float32 in {0, 1}
    pos_mask: np.ndarray     # (H', W') bool, the responsibility set A
    offsets: np.ndarray      # (2, H', W'), valid where pos_mask
    truth_tep: np.ndarray    # (2,)
    o_alpha: float
    c_mask: np.ndarray       # (H', W') bool, the constraint set C
    i_obj_px: np.ndarray     # (2,) truth pixel (row, col)


def assign_labels(region: RasterRegion, truth_world, imm_error: float,
                  meas_error: float, cfg: NetConfig):
    """Labels for a window whose truth (at t_kL) lies inside the region.

    Returns None when the truth falls outside; callers drop the window and
    count it.
    """
    stride = cfg.stride
    if region.height % stride or region.width % stride:
        raise ValueError("region dims must be divisible by the TEP stride")
    px = np.array(region.world_to_pixel(truth_world))
    if not region.contains_pixel(px):
        return None
    hp = region.height // stride
    wp = region.width // stride
    truth_tep = px / stride
    ti = min(max(int(np.floor(truth_tep[0])), 0), hp - 1)
    tj = min(max(int(np.floor(truth_tep[1])), 0), wp - 1)

    p = np.zeros((hp, wp), dtype=np.float32)
    offsets = np.zeros((2, hp, wp), dtype=np.float64)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            r, c = ti + di, tj + dj
            if 0 <= r < hp and 0 <= c < wp:
                p[r, c] = 1.0
                offsets[0, r, c] = truth_tep[0] - r
                offsets[1, r, c] = truth_tep[1] - c
    pos_mask = p > 0.5

    if meas_error <= 0.0:
        o_alpha = 0.0
    else:
        o_alpha = float(np.clip((meas_error - imm_error) / meas_error, 0.0, 1.0))

    rows = np.arange(hp)[:, None] * stride
    cols = np.arange(wp)[None, :] * stride
    dist2 = (rows - px[0]) ** 2 + (cols - px[1]) ** 2
    c_mask = dist2 < cfg.d

    return TepLabels(
        p=p,
        pos_mask=pos_mask,
        offsets=offsets,
        truth_tep=truth_tep,
        o_alpha=o_alpha,
        c_mask=c_mask,
        i_obj_px=px,
    )
