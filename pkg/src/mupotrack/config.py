"""Run configuration: one JSON document driving every CLI command.

The document is deep-merged over DEFAULTS; unknown keys are rejected so typos
fail loudly. Angles are degrees in the file (azimuth, course, turn rates) and
radians everywhere inside the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .detector.net import NetConfig
from .geometry import RadarParams
from .imm import BANK_PRESETS, ImmConfig, markov_pi
from .raster import RasterConfig
from .simulate import DynamicModel, InitRanges, ScenarioConfig, default_model_set
from .tracker import TrackerConfig

SCHEMA_VERSION = 1

_DEG = math.pi / 180.0


class ConfigError(ValueError):
    pass


def model_to_doc(m: DynamicModel) -> dict:
    return {
        "tag": m.tag,
        "q": m.q,
        "omega_deg": m.omega / _DEG,
        "omega_range_deg": [m.omega_range[0] / _DEG, m.omega_range[1] / _DEG],
        "tau": m.tau,
        "sigma_m": m.sigma_m,
        "a_max": m.a_max,
    }


def model_from_doc(doc: dict) -> DynamicModel:
    allowed = {"tag", "q", "omega_deg", "omega_range_deg", "tau", "sigma_m", "a_max"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown model keys: {sorted(unknown)}")
    if "tag" not in doc:
        raise ConfigError("model entry needs a tag")
    base = model_to_doc(DynamicModel(doc["tag"]))
    base.update(doc)
    lo, hi = base["omega_range_deg"]
    return DynamicModel(
        tag=base["tag"], q=base["q"], omega=base["omega_deg"] * _DEG,
        omega_range=(lo * _DEG, hi * _DEG), tau=base["tau"],
        sigma_m=base["sigma_m"], a_max=base["a_max"],
    )


def _defaults() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": {
            "duration": 200.0,
            "sim_dt": 0.1,
            "meas_dt": 1.0,
            "lambda_switch": 0.02,
            "initial_model": "CV",
            "snr_1": 100.0,
            "v_max": 300.0,
            "seed": 0,
            "models": [model_to_doc(m) for m in default_model_set()],
            "transition": None,
            "radar": {
                "range_coeff": 150.0,
                "azimuth_coeff": 0.02,
                "reference_snr": 100.0,
                "reference_range": 200000.0,
            },
            "init_ranges": {
                "rho": [150000.0, 400000.0],
                "azimuth_deg": [-180.0, 180.0],
                "speed": [200.0, 220.0],
                "course_deg": [-180.0, 180.0],
            },
        },
        "raster": {
            "mode": "fixed",
            "length": 4,
            "v_max": 300.0,
            "cell": None,
            "size": 128,
            "margin": None,
            "k_sigma": 3.0,
            "flex_cell": None,
            "stride": 32,
            "n_samples": None,
        },
        "net": {
            "tep_density": 1.0 / 32.0,
            "widths": [16, 32, 64, 96, 128],
            "neck_width": 64,
            "seed": 0,
            "lr": 1e-3,
            "batch_size": 16,
            "epochs": 40,
            "lambda_d": 1.0,
            "lambda_r": 5.0,
            "lambda_conf": 0.5,
            "lambda_c": 0.1,
            "lambda_e": 1.0,
            "lambda_p": 1.0,
            "radius_d": None,
            "threshold": 0.5,
        },
        "imm": {
            "preset": "default8",
            "self_prob": 0.95,
            "pad_var": 100.0,
        },
        "tfot": {
            "gamma": 2,
            "lam": 1e-3,
        },
        "tracker": {
            "threshold": 0.5,
            "warmup_s": 10.0,
        },
        "eval": {
            "n_runs": 25,
            "seed": 0,
            "warmup_s": 10.0,
        },
    }


def deep_merge(base, override, path="") -> dict:
    """Merge override into base; keys absent from base are errors."""
    out = dict(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = deep_merge(base[key], value, here)
        else:
            out[key] = value
    return out


def _pair(doc, key, scale=1.0):
    lo, hi = doc[key]
    return (lo * scale, hi * scale)


def scenario_from_doc(doc: dict) -> ScenarioConfig:
    r = doc["radar"]
    ir = doc["init_ranges"]
    models = tuple(model_from_doc(m) for m in doc["models"])
    trans = None if doc["transition"] is None else np.asarray(doc["transition"], dtype=float)
    try:
        return ScenarioConfig(
            models=models,
            init_ranges=InitRanges(
                rho=_pair(ir, "rho"),
                azimuth=_pair(ir, "azimuth_deg", _DEG),
                speed=_pair(ir, "speed"),
                course=_pair(ir, "course_deg", _DEG),
            ),
            duration=doc["duration"],
            sim_dt=doc["sim_dt"],
            meas_dt=doc["meas_dt"],
            lambda_switch=doc["lambda_switch"],
            transition=trans,
            initial_model=doc["initial_model"],
            snr_1=doc["snr_1"],
            radar=RadarParams(
                range_coeff=r["range_coeff"], azimuth_coeff=r["azimuth_coeff"],
                reference_snr=r["reference_snr"], reference_range=r["reference_range"],
            ),
            v_max=doc["v_max"],
            seed=doc["seed"],
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err


def imm_from_doc(doc: dict) -> ImmConfig:
    preset = doc["preset"]
    if preset not in BANK_PRESETS:
        raise ConfigError(f"unknown imm preset {preset!r}; choose from {sorted(BANK_PRESETS)}")
    models = BANK_PRESETS[preset]()
    try:
        return ImmConfig(
            models=models,
            trans=markov_pi(len(models), self_prob=doc["self_prob"]),
            pad_var=doc["pad_var"],
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err


@dataclass(frozen=True)
class RunConfig:
    doc: dict
    scenario: ScenarioConfig
    raster: RasterConfig
    net: NetConfig
    imm: ImmConfig
    tracker: TrackerConfig
    eval_n_runs: int
    eval_seed: int
    eval_warmup_s: float

    def with_seed(self, seed: int) -> "RunConfig":
        """Override every seed in the document (scenario, net, eval)."""
        doc = json.loads(json.dumps(self.doc))
        doc["scenario"]["seed"] = seed
        doc["net"]["seed"] = seed
        doc["eval"]["seed"] = seed
        return build_config(doc, merged=True)


def build_config(user_doc: dict, merged: bool = False) -> RunConfig:
    if not isinstance(user_doc, dict):
        raise ConfigError("config document must be a JSON object")
    version = user_doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")
    doc = dict(user_doc) if merged else deep_merge(_defaults(), user_doc)
    doc["schema_version"] = SCHEMA_VERSION

    scenario = scenario_from_doc(doc["scenario"])
    try:
        raster = RasterConfig(**doc["raster"])
        net_doc = dict(doc["net"])
        net_doc["widths"] = tuple(net_doc["widths"])
        net = NetConfig(in_channels=4, **net_doc)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
    imm = imm_from_doc(doc["imm"])
    try:
        tracker = TrackerConfig(
            raster=raster,
            imm=imm,
            radar=scenario.radar,
            gamma=doc["tfot"]["gamma"],
            lam=doc["tfot"]["lam"],
            threshold=doc["tracker"]["threshold"],
            warmup_s=doc["tracker"]["warmup_s"],
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err

    ev = doc["eval"]
    if not isinstance(ev["n_runs"], int) or ev["n_runs"] < 1:
        raise ConfigError("eval.n_runs must be a positive integer")
    return RunConfig(
        doc=doc,
        scenario=scenario,
        raster=raster,
        net=net,
        imm=imm,
        tracker=tracker,
        eval_n_runs=ev["n_runs"],
        eval_seed=ev["seed"],
        eval_warmup_s=ev["warmup_s"],
    )


def load_config(path=None) -> RunConfig:
    """Load a config file (JSON); None gives the packaged defaults."""
    if path is None:
        return build_config({})
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    user_doc = json.loads(text)  # JSONDecodeError carries line/column
    return build_config(user_doc)


def config_digest_doc(cfg: RunConfig) -> dict:
    return cfg.doc
