"""Training loop for the detection network."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from ..raster import MupoTensor
from .labels import TepLabels
from .losses import LabelBatch, total_loss
from .net import MupoNet, NetConfig, build_network, normalize_tensor


@dataclass
class TrainSample:
    tensor: MupoTensor
    labels: TepLabels
    imm_world: np.ndarray     # IMM position at t_kL, world meters
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    loss_total: float
    loss_det: float
    loss_reg: float
    loss_conf: float
    loss_constraint: float


@dataclass
class TrainResult:
    net: MupoNet
    log: list
    epoch_seconds: list


def _batches(order, size):
    for i in range(0, len(order), size):
        yield order[i : i + size]


def train(dataset, cfg: NetConfig, mode: str = "fixed", progress=None) -> TrainResult:
    """Mini-batch Adam over the dataset.

    Fixed-mode tensors share a shape and batch together; flexible mode runs
    batch size 1. Deterministic under a fixed seed: the shuffle generator and
    parameter init both derive from cfg.seed.
    """
    if not dataset:
        raise ValueError("empty dataset")
    net = build_network(cfg)
    net.train(True)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    gen = torch.Generator().manual_seed(cfg.seed)
    batch_size = cfg.batch_size if mode == "fixed" else 1

    inputs = [normalize_tensor(s.tensor) for s in dataset]
    log = []
    seconds = []
    for epoch in range(1, cfg.epochs + 1):
        t_start = time.perf_counter()
        order = torch.randperm(len(dataset), generator=gen).tolist()
        sums = {"total": 0.0, "det": 0.0, "reg": 0.0, "conf": 0.0, "constraint": 0.0}
        for batch_idx in _batches(order, batch_size):
            x = torch.stack([inputs[i] for i in batch_idx])
            batch = LabelBatch.from_samples(
                [dataset[i].labels for i in batch_idx],
                [dataset[i].imm_world for i in batch_idx],
                [dataset[i].tensor.region for i in batch_idx],
                cfg.stride,
            )
            opt.zero_grad()
            pred = net(x)
            loss, parts = total_loss(pred, batch, cfg)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            loss.backward()
            opt.step()
            sums["total"] += value
            for k in ("det", "reg", "conf", "constraint"):
                sums[k] += parts[k]
        log.append(
            EpochLog(
                epoch=epoch,
                loss_total=sums["total"],
                loss_det=sums["det"],
                loss_reg=sums["reg"],
                loss_conf=sums["conf"],
                loss_constraint=sums["constraint"],
            )
        )
        seconds.append(time.perf_counter() - t_start)
        if progress is not None:
            progress(log[-1])
    net.train(False)
    return TrainResult(net=net, log=log, epoch_seconds=seconds)
