"""Grid-detection network over MUPO tensors.

Compact convolutional backbone (five stride-2 stages), a top-down neck, and a
single head emitting per-TEP existence probability, coordinate offsets, and
confidence at the configured TEP density.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from ..raster import MupoTensor, RasterRegion

ALLOWED_STRIDES = (8, 16, 32)
CHECKPOINT_MAGIC = b"MTTN"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    tep_density: float = 1.0 / 32.0
    widths: tuple = (16, 32, 64, 96, 128)
    neck_width: int = 64
    in_channels: int = 4
    seed: int = 0
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 40
    lambda_d: float = 1.0
    lambda_r: float = 5.0
    lambda_conf: float = 0.5
    lambda_c: float = 0.1
    lambda_e: float = 1.0
    lambda_p: float = 1.0
    radius_d: float = None          # px^2; None -> (2/r)^2
    threshold: float = 0.5

    def __post_init__(self):
        if self.stride not in ALLOWED_STRIDES:
            raise ValueError("tep_density must be one of 1/8, 1/16, 1/32")
        if len(self.widths) != 5 or any(w <= 0 for w in self.widths):
            raise ValueError("widths must be 5 positive stage widths")
        for name in ("lambda_d", "lambda_r", "lambda_conf", "lambda_c", "lambda_e", "lambda_p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))

    @property
    def stride(self) -> int:
        return int(round(1.0 / self.tep_density))

    @property
    def d(self) -> float:
        return self.radius_d if self.radius_d is not None else float((2 * self.stride) ** 2)

    def to_json(self) -> str:
        doc = asdict(self)
        doc["widths"] = list(self.widths)
        return json.dumps(doc, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "NetConfig":
        doc = json.loads(text)
        doc["widths"] = tuple(doc["widths"])
        return cls(**doc)


@dataclass
class TepGrid:
    """Per-sample network output plus the grid -> world transform."""

    p: torch.Tensor        # (H', W')
    off: torch.Tensor      # (2, H', W') in stride units, (row, col)
    alpha: torch.Tensor    # (H', W')
    stride: int
    region: RasterRegion = None


class MupoNet(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.widths
        chans = (cfg.in_channels,) + w
        self.stages = nn.ModuleList(
            nn.Sequential(
                nn.Conv2d(chans[i], chans[i + 1], 3, stride=2, padding=1),
                nn.SiLU(),
                nn.Conv2d(chans[i + 1], chans[i + 1], 3, padding=1),
                nn.SiLU(),
            )
            for i in range(5)
        )
        nw = cfg.neck_width
        self.lat3 = nn.Conv2d(w[2], nw, 1)
        self.lat4 = nn.Conv2d(w[3], nw, 1)
        self.lat5 = nn.Conv2d(w[4], nw, 1)
        self.smooth4 = nn.Conv2d(nw, nw, 3, padding=1)
        self.smooth3 = nn.Conv2d(nw, nw, 3, padding=1)
        self.head = nn.Sequential(
            nn.Conv2d(nw, nw, 3, padding=1),
            nn.SiLU(),
            nn.Conv2d(nw, 4, 1),
        )
        self.up = nn.Upsample(scale_factor=2, mode="nearest")

    def forward(self, x: torch.Tensor):
        """x: (B, 4, H, W) normalized; returns (p, off, alpha) batched maps."""
        if x.shape[-1] % 32 or x.shape[-2] % 32:
            raise ValueError("input dims must be divisible by 32")
        feats = []
        h = x
        for stage in self.stages:
            h = stage(h)
            feats.append(h)
        n5 = self.lat5(feats[4])
        n4 = self.smooth4(self.lat4(feats[3]) + self.up(n5))
        n3 = self.smooth3(self.lat3(feats[2]) + self.up(n4))
        feat = {32: n5, 16: n4, 8: n3}[self.cfg.stride]
        raw = self.head(feat)
        p = torch.sigmoid(raw[:, 0])
        off = 3.0 * torch.sigmoid(raw[:, 1:3]) - 1.0   # spans the 3x3 responsibility area
        alpha = torch.sigmoid(raw[:, 3])
        return p, off, alpha


def build_network(cfg: NetConfig) -> MupoNet:
    """Network with deterministic initialization from cfg.seed."""
    torch.manual_seed(cfg.seed)
    net = MupoNet(cfg)
    net.train(False)
    return net


def normalize_tensor(mupo: MupoTensor) -> torch.Tensor:
    """(4, H, W) float32 input with each channel scaled by max(1, channel max)."""
    planes = mupo.channels.astype(np.float32, copy=True)
    for c in range(planes.shape[0]):
        m = float(planes[c].max())
        if m > 1.0:
            planes[c] /= m
    return torch.from_numpy(planes)


def forward_grid(net: MupoNet, mupo: MupoTensor) -> TepGrid:
    """Single-tensor inference; returns the TepGrid with the region attached."""
    x = normalize_tensor(mupo)[None]
    with torch.no_grad():
        p, off, alpha = net(x)
    return TepGrid(p=p[0], off=off[0], alpha=alpha[0], stride=net.cfg.stride, region=mupo.region)


@dataclass(frozen=True)
class Detection:
    position: tuple        # world (x, y) m
    confidence: float


def decode(pred: TepGrid, threshold: float, region: RasterRegion = None):
    """Probability-weighted merge of above-threshold TEPs; None if all below."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    region = region if region is not None else pred.region
    p = pred.p.detach().cpu().numpy()
    off = pred.off.detach().cpu().numpy()
    alpha = pred.alpha.detach().cpu().numpy()
    sel = p > threshold
    if not sel.any():
        return None
    rows, cols = np.nonzero(sel)
    w = p[rows, cols]
    glob_r = off[0, rows, cols] + rows
    glob_c = off[1, rows, cols] + cols
    wsum = w.sum()
    tep_r = float((w * glob_r).sum() / wsum)
    tep_c = float((w * glob_c).sum() / wsum)
    conf = float((w * alpha[rows, cols]).sum() / wsum)
    xy = region.pixel_to_world((tep_r * pred.stride, tep_c * pred.stride))
    return Detection(position=(float(xy[0]), float(xy[1])), confidence=conf)


def save_checkpoint(net: MupoNet, path):
    """magic, version, length-prefixed canonical-JSON config, then parameters
    in declaration order as u32 dims headers + f32 little-endian data."""
    blob = net.cfg.to_json().encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<H", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, param in net.named_parameters():
            arr = param.detach().cpu().numpy().astype("<f4")
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> MupoNet:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<H", fh.read(2))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (blob_len,) = struct.unpack("<I", fh.read(4))
        cfg = NetConfig.from_json(fh.read(blob_len).decode("utf-8"))
        net = build_network(cfg)
        with torch.no_grad():
            for name, param in net.named_parameters():
                (ndim,) = struct.unpack("<I", fh.read(4))
                shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
                if tuple(param.shape) != shape:
                    raise ValueError(f"parameter {name} shape mismatch in checkpoint")
                count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
                data = np.frombuffer(fh.read(4 * count), dtype="<f4").reshape(shape)
                param.copy_(torch.from_numpy(data.astype(np.float32)))
        trailing = fh.read(1)
        if trailing:
            raise ValueError("trailing bytes in checkpoint")
    return net
