"""File formats: JSONL sequences, the raster binary, PGM dumps, CSV logs.

All writers are deterministic: canonical JSON uses sorted keys, floats are
emitted with repr (shortest round-trip), and binary layouts are little-endian.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .raster import MupoTensor, RasterRegion
from .simulate import TargetState, Track
from .geometry import PolarMeasurement
from .tracker import TrackEstimate

RASTER_MAGIC = b"MUPO"
RASTER_VERSION = 1


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, allow_nan=False))
            fh.write("\n")


def read_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# JSONL row shapes; key order is part of the format.

def track_to_rows(track: Track):
    return [
        {"t": s.t, "x": s.x, "y": s.y, "vx": s.vx, "vy": s.vy, "model": s.model}
        for s in track.states
    ]


def rows_to_track(rows) -> Track:
    return Track(states=tuple(
        TargetState(t=r["t"], x=r["x"], y=r["y"], vx=r["vx"], vy=r["vy"], model=r["model"])
        for r in rows
    ))


def measurements_to_rows(measurements):
    return [{"t": z.t, "rho": z.rho, "theta": z.theta, "snr": z.snr} for z in measurements]


def rows_to_measurements(rows):
    return [PolarMeasurement(rho=r["rho"], theta=r["theta"], snr=r["snr"], t=r["t"]) for r in rows]


def estimates_to_rows(estimates):
    return [
        {"t": e.t, "x": e.x, "y": e.y, "vx": e.vx, "vy": e.vy, "source": e.source, "conf": e.conf}
        for e in estimates
    ]


def rows_to_estimates(rows):
    return [
        TrackEstimate(t=r["t"], x=r["x"], y=r["y"], vx=r["vx"], vy=r["vy"],
                      source=r["source"], conf=r["conf"])
        for r in rows
    ]


def write_raster(path, tensor: MupoTensor):
    """magic, u16 version, H W C u32, x0 y0 cell f64, then C*H*W f32; all LE."""
    c, h, w = tensor.channels.shape
    with open(path, "wb") as fh:
        fh.write(RASTER_MAGIC)
        fh.write(struct.pack("<H", RASTER_VERSION))
        fh.write(struct.pack("<III", h, w, c))
        fh.write(struct.pack("<ddd", tensor.region.x0, tensor.region.y0, tensor.region.cell))
        fh.write(np.ascontiguousarray(tensor.channels, dtype="<f4").tobytes())


def read_raster(path) -> MupoTensor:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != RASTER_MAGIC:
            raise ValueError(f"bad raster magic {magic!r}")
        (version,) = struct.unpack("<H", fh.read(2))
        if version != RASTER_VERSION:
            raise ValueError(f"unsupported raster version {version}")
        h, w, c = struct.unpack("<III", fh.read(12))
        x0, y0, cell = struct.unpack("<ddd", fh.read(24))
        data = np.frombuffer(fh.read(4 * c * h * w), dtype="<f4")
        if data.size != c * h * w:
            raise ValueError("truncated raster data")
        if fh.read(1):
            raise ValueError("trailing bytes in raster file")
    channels = data.reshape(c, h, w).astype(np.float32)
    region = RasterRegion(x0=x0, y0=y0, cell=cell, height=h, width=w)
    return MupoTensor(region=region, channels=channels, t_window=())


def write_pgm(path, plane: np.ndarray):
    """8-bit P5 scaled by 255/plane-max (all zeros when the plane is empty)."""
    plane = np.asarray(plane, dtype=np.float64)
    peak = plane.max() if plane.size else 0.0
    if peak > 0.0:
        data = np.floor(plane * (255.0 / peak) + 0.5).astype(np.uint8)
    else:
        data = np.zeros(plane.shape, dtype=np.uint8)
    h, w = plane.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P5\n"):
        raise ValueError("not a raw PGM produced by this tool")
    head, rest = blob.split(b"\n255\n", 1)
    dims = head.split(b"\n")[1].split()
    w, h = int(dims[0]), int(dims[1])
    return np.frombuffer(rest, dtype=np.uint8).reshape(h, w)


TRAIN_LOG_COLUMNS = ("epoch", "loss_total", "loss_det", "loss_reg", "loss_conf", "loss_constraint")


def write_train_log(path, log):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(TRAIN_LOG_COLUMNS) + "\n")
        for row in log:
            fh.write(
                f"{row.epoch},{row.loss_total!r},{row.loss_det!r},"
                f"{row.loss_reg!r},{row.loss_conf!r},{row.loss_constraint!r}\n"
            )


def write_rmse_csv(path, report):
    names = sorted(report.rmse)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(names) + "\n")
        for i, t in enumerate(report.ticks):
            vals = ",".join(repr(float(report.rmse[n][i])) for n in names)
            fh.write(f"{float(t)!r},{vals}\n")


def write_report_json(path, report):
    doc = {
        "armse": {k: float(v) for k, v in sorted(report.armse.items())},
        "n_runs": report.n_runs,
        "seed": report.seed,
        "warmup_s": report.warmup_s,
        "config_digest": report.config_digest,
        "failures": dict(sorted(report.failures.items())),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))
        fh.write("\n")


def write_error_strips(path, report):
    """Per-method heat strip of per-tick RMSE, one row per method."""
    names = sorted(report.rmse)
    img = np.stack([report.rmse[n] for n in names])
    write_pgm(path, img)
