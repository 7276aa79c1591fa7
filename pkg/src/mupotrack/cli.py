"""Command-line entry points.

Exit codes: 0 success, 1 configuration/validation, 2 I/O, 3 numeric failure.
Every command is deterministic given identical inputs and --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .detector.labels import assign_labels
from .detector.net import load_checkpoint, save_checkpoint
from .detector.train import TrainSample, train
from .evaluate import imm_method, monte_carlo, mupo_method, passthrough_method
from .formats import (
    canonical_json,
    digest,
    estimates_to_rows,
    measurements_to_rows,
    read_jsonl,
    read_raster,
    rows_to_measurements,
    rows_to_track,
    track_to_rows,
    write_jsonl,
    write_pgm,
    write_raster,
    write_report_json,
    write_rmse_csv,
    write_train_log,
)
from .raster import CHANNEL_NAMES
from .simulate import generate_measurements, generate_track, scenario_rng
from .tracker import iter_window_tensors, run_track


def _parse_threads(value) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return n


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config file (defaults used when omitted)")
    common.add_argument("--seed", type=int, default=None, help="override every configured seed")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument(
        "--threads", type=_parse_threads,
        default=os.environ.get("MUPO_THREADS", "1"),
        help="worker threads (default: MUPO_THREADS or 1)",
    )

    parser = argparse.ArgumentParser(prog="mupo", description="Radar tracking toolkit")
    parser.add_argument("--version", action="version", version=f"mupo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="generate a truth track and measurements")

    p = sub.add_parser("make-dataset", parents=[common], help="window measurements into rasters + labels")
    p.add_argument("--truth", nargs="+", required=True, help="truth JSONL file(s)")
    p.add_argument("--measurements", nargs="+", required=True, help="measurement JSONL file(s), paired with --truth")

    p = sub.add_parser("train", parents=[common], help="train the detection network on a dataset")
    p.add_argument("--dataset", required=True, help="dataset directory from make-dataset")

    p = sub.add_parser("track", parents=[common], help="run the tracker over a measurement file")
    p.add_argument("--measurements", required=True)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("eval", parents=[common], help="paired Monte-Carlo evaluation")
    p.add_argument("--checkpoint", default=None, help="include the network tracker when given")

    p = sub.add_parser("inspect", parents=[common], help="dump one raster channel as PGM")
    p.add_argument("--raster", required=True, help=".mupo raster file")
    p.add_argument("--channel", default="measurement-sequence",
                   help="channel name or index (default: measurement-sequence)")
    return parser


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def cmd_simulate(args) -> int:
    cfg = _load_run_config(args)
    rng = scenario_rng(cfg.scenario)
    track = generate_track(cfg.scenario, rng)
    measurements = generate_measurements(track, cfg.scenario, rng)
    write_jsonl(_out_path(args, "truth.jsonl"), track_to_rows(track))
    write_jsonl(_out_path(args, "measurements.jsonl"), measurements_to_rows(measurements))
    print(f"wrote {len(track.states)} truth states, {len(measurements)} measurements")
    return 0


def build_dataset_records(truth_path, meas_path, cfg: RunConfig):
    """One source pair -> (tensor, ingredient-row) list plus the drop count."""
    track = rows_to_track(read_jsonl(truth_path))
    measurements = rows_to_measurements(read_jsonl(meas_path))
    records = []
    dropped = 0
    for k, tensor, imm, window in iter_window_tensors(measurements, cfg.tracker):
        t = window[-1].t
        truth = track.state_at(t, cfg.scenario.sim_dt)
        truth_xy = np.array([truth.x, truth.y])
        imm_error = float(np.linalg.norm(imm.position - truth_xy))
        meas_error = float(np.linalg.norm(window[-1].position - truth_xy))
        labels = assign_labels(tensor.region, truth_xy, imm_error, meas_error, cfg.net)
        if labels is None:
            dropped += 1
            continue
        row = {
            "t": t,
            "tick": k,
            "truth": [truth.x, truth.y],
            "imm": [float(imm.position[0]), float(imm.position[1])],
            "imm_error": imm_error,
            "meas_error": meas_error,
        }
        records.append((tensor, row))
    return records, dropped


def cmd_make_dataset(args) -> int:
    cfg = _load_run_config(args)
    if len(args.truth) != len(args.measurements):
        raise ConfigError("--truth and --measurements need the same number of files")
    os.makedirs(args.out, exist_ok=True)
    rows = []
    dropped = 0
    index = 0
    for truth_path, meas_path in zip(args.truth, args.measurements):
        records, n_drop = build_dataset_records(truth_path, meas_path, cfg)
        dropped += n_drop
        for tensor, row in records:
            write_raster(os.path.join(args.out, f"sample_{index:05d}.mupo"), tensor)
            row = {"index": index, **row}
            rows.append(row)
            index += 1
    write_jsonl(os.path.join(args.out, "labels.jsonl"), rows)
    manifest = {
        "schema_version": 1,
        "n_samples": index,
        "n_dropped": dropped,
        "raster_mode": cfg.raster.mode,
        "config_digest": digest(cfg.doc),
    }
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(canonical_json(manifest))
        fh.write("\n")
    print(f"wrote {index} windows ({dropped} dropped outside region)")
    return 0


def load_dataset(dataset_dir, cfg: RunConfig):
    """Rebuild TrainSamples from a dataset directory.

    Labels are re-derived from the stored ingredients so the TEP grid always
    matches the network config in force at training time.
    """
    manifest_path = os.path.join(dataset_dir, "manifest.json")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != 1:
        raise ConfigError("unsupported dataset schema_version")
    samples = []
    skipped = 0
    for row in read_jsonl(os.path.join(dataset_dir, "labels.jsonl")):
        tensor = read_raster(os.path.join(dataset_dir, f"sample_{row['index']:05d}.mupo"))
        labels = assign_labels(
            tensor.region, np.asarray(row["truth"], dtype=float),
            row["imm_error"], row["meas_error"], cfg.net,
        )
        if labels is None:
            skipped += 1
            continue
        samples.append(TrainSample(
            tensor=tensor,
            labels=labels,
            imm_world=np.asarray(row["imm"], dtype=float),
            meta={"t": row["t"], "index": row["index"]},
        ))
    return samples, manifest, skipped


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    samples, manifest, skipped = load_dataset(args.dataset, cfg)
    if not samples:
        raise ConfigError("dataset has no usable samples")
    result = train(samples, cfg.net, mode=manifest.get("raster_mode", cfg.raster.mode))
    save_checkpoint(result.net, _out_path(args, "checkpoint.mttn"))
    write_train_log(_out_path(args, "train_log.csv"), result.log)
    final = result.log[-1]
    print(f"trained {len(samples)} samples ({skipped} skipped), "
          f"{len(result.log)} epochs, final loss {final.loss_total:.6g}")
    return 0


def cmd_track(args) -> int:
    cfg = _load_run_config(args)
    measurements = rows_to_measurements(read_jsonl(args.measurements))
    net = load_checkpoint(args.checkpoint)
    estimates = run_track(measurements, net, cfg.tracker)
    write_jsonl(_out_path(args, "estimates.jsonl"), estimates_to_rows(estimates))
    print(f"wrote {len(estimates)} estimates")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_run_config(args)
    methods = [
        ("passthrough", passthrough_method(cfg.scenario.radar)),
        ("imm", imm_method(cfg.imm, cfg.scenario.radar)),
    ]
    if args.checkpoint is not None:
        net = load_checkpoint(args.checkpoint)
        methods.append(("mupo", mupo_method(net, cfg.tracker)))
    report = monte_carlo(
        cfg.scenario, methods, n_runs=cfg.eval_n_runs, seed=cfg.eval_seed,
        warmup_s=cfg.eval_warmup_s, threads=args.threads,
        config_digest=digest(cfg.doc),
    )
    write_report_json(_out_path(args, "report.json"), report)
    write_rmse_csv(_out_path(args, "rmse.csv"), report)
    for name in sorted(report.armse):
        print(f"{name}: ARMSE {report.armse[name]:.3f} m ({report.failures[name]} failed runs)")
    return 0


def cmd_inspect(args) -> int:
    tensor = read_raster(args.raster)
    channel = args.channel
    if channel.isdigit():
        idx = int(channel)
        if not 0 <= idx < tensor.channels.shape[0]:
            raise ConfigError(f"channel index {idx} out of range")
    else:
        if channel not in CHANNEL_NAMES:
            raise ConfigError(f"unknown channel {channel!r}; choose from {list(CHANNEL_NAMES)}")
        idx = CHANNEL_NAMES.index(channel)
    out = _out_path(args, f"channel_{idx}.pgm")
    write_pgm(out, tensor.channels[idx])
    print(f"wrote {out}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "make-dataset": cmd_make_dataset,
    "train": cmd_train,
    "track": cmd_track,
    "eval": cmd_eval,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; map them to the config code
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "threads", None) is not None:
        try:
            import torch

            torch.set_num_threads(args.threads)
        except ImportError:
            pass
    try:
        return _COMMANDS[args.command](args)
    except json.JSONDecodeError as err:
        print(f"config error: invalid JSON at line {err.lineno} column {err.colno}: {err.msg}",
              file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return 2
    except (FloatingPointError, np.linalg.LinAlgError) as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
