"""The four training losses and their weighted total.

All losses are per-TEP sums (not means), batch-summed, with probabilities
clamped to [EPS, 1-EPS] before any log.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..raster import RasterRegion
from .labels import TepLabels
from .net import NetConfig

EPS = 1e-7


@dataclass
class LabelBatch:
    """Stacked label tensors for a batch of same-shape samples."""

    p: torch.Tensor          # (B, H', W')
    pos_mask: torch.Tensor   # (B, H', W') bool
    o_alpha: torch.Tensor    # (B,)
    truth_tep: torch.Tensor  # (B, 2)
    imm_tep: torch.Tensor    # (B, 2)
    c_mask: torch.Tensor     # (B, H', W') bool

    @classmethod
    def from_samples(cls, labels, imm_worlds, regions, stride: int, dtype=torch.float32):
        p = torch.stack([torch.as_tensor(l.p, dtype=dtype) for l in labels])
        pos = torch.stack([torch.as_tensor(l.pos_mask) for l in labels])
        oa = torch.tensor([l.o_alpha for l in labels], dtype=dtype)
        tt = torch.stack([torch.as_tensor(l.truth_tep, dtype=dtype) for l in labels])
        imm = []
        for w, region in zip(imm_worlds, regions):
            rc = region.world_to_pixel(w)
            imm.append((rc[0] / stride, rc[1] / stride))
        imm = torch.tensor(imm, dtype=dtype)
        cm = torch.stack([torch.as_tensor(l.c_mask) for l in labels])
        return cls(p=p, pos_mask=pos, o_alpha=oa, truth_tep=tt, imm_tep=imm, c_mask=cm)


def _clamped(p: torch.Tensor) -> torch.Tensor:
    return p.clamp(EPS, 1.0 - EPS)


def _bce(pred, target):
    pred = _clamped(pred)
    return -(target * pred.log() + (1.0 - target) * (1.0 - pred).log())


def loss_detection(pred_p: torch.Tensor, batch: LabelBatch) -> torch.Tensor:
    """Summed binary cross-entropy of existence probability over every TEP."""
    return _bce(pred_p, batch.p).sum()


def loss_confidence(pred_alpha: torch.Tensor, batch: LabelBatch) -> torch.Tensor:
    """Cross-entropy of the confidence against o_alpha, positives only."""
    target = batch.o_alpha[:, None, None].expand_as(pred_alpha)
    return (_bce(pred_alpha, target) * batch.pos_mask).sum()


def anchor_grid(hp: int, wp: int, dtype=torch.float32) -> torch.Tensor:
    """(2, H', W') TEP coordinates i^m in grid units, (row, col)."""
    rows = torch.arange(hp, dtype=dtype)[:, None].expand(hp, wp)
    cols = torch.arange(wp, dtype=dtype)[None, :].expand(hp, wp)
    return torch.stack([rows, cols])


def loss_regression(pred_off: torch.Tensor, pred_alpha: torch.Tensor, batch: LabelBatch) -> torch.Tensor:
    """Squared error of the confidence-fused position against the global truth,
    in TEP-grid coordinates, over the positive TEPs. Gradients flow through
    both the offsets and the confidence."""
    b, _, hp, wp = pred_off.shape
    i_m = anchor_grid(hp, wp, dtype=pred_off.dtype)[None]
    glob = pred_off + i_m
    a = pred_alpha[:, None]
    fused = (1.0 - a) * glob + a * batch.imm_tep[:, :, None, None]
    err = ((batch.truth_tep[:, :, None, None] - fused) ** 2).sum(dim=1)
    return (err * batch.pos_mask).sum()


def loss_constraint(pred_p: torch.Tensor, batch: LabelBatch, cfg: NetConfig) -> torch.Tensor:
    """Entropy push-down outside the constraint set plus the perplexity of the
    inside probabilities (computed in log space)."""
    p = _clamped(pred_p)
    logp = p.log()
    outside = (~batch.c_mask).to(p.dtype)
    entropy = -(p * logp * outside).sum(dim=(1, 2))
    counts = batch.c_mask.sum(dim=(1, 2)).clamp(min=1).to(p.dtype)
    mean_log = (logp * batch.c_mask).sum(dim=(1, 2)) / counts
    perplexity = torch.exp(-mean_log)
    return (cfg.lambda_e * entropy + cfg.lambda_p * perplexity).sum()


def total_loss(pred, batch: LabelBatch, cfg: NetConfig):
    """Weighted sum of the four losses; returns (total, parts) with detached parts."""
    pred_p, pred_off, pred_alpha = pred
    det = loss_detection(pred_p, batch)
    reg = loss_regression(pred_off, pred_alpha, batch)
    conf = loss_confidence(pred_alpha, batch)
    cons = loss_constraint(pred_p, batch, cfg)
    total = cfg.lambda_d * det + cfg.lambda_r * reg + cfg.lambda_conf * conf + cfg.lambda_c * cons
    parts = {
        "det": float(det.detach()),
        "reg": float(reg.detach()),
        "conf": float(conf.detach()),
        "constraint": float(cons.detach()),
    }
    return total, parts


def imm_world_to_tep(region: RasterRegion, imm_world, stride: int):
    rc = region.world_to_pixel(imm_world)
    return np.array([rc[0] / stride, rc[1] / stride])
