"""mupotrack: maneuvering-target radar tracking with a learned detection stage.

The pipeline converts polar radar measurements to Cartesian with a
bias-corrected transform, rasterizes a sliding window of measurement
likelihoods into a multi-channel image, runs a small convolutional detector
over it, and fuses the decoded position with an IMM filter estimate.
"""

from .geometry import (
    ConvertedMeasurement,
    PolarMeasurement,
    RadarParams,
    linearized_cartesian_cov,
    mucm_convert,
    propagate_snr,
    snr_to_polar_sigma,
    wrap_angle,
)
from .imm import ImmConfig, ImmEstimate, default_bank, imm_step, init_from_measurements, markov_pi
from .raster import MupoTensor, RasterConfig, RasterRegion, assemble, build_region
from .simulate import (
    DynamicModel,
    InitRanges,
    ScenarioConfig,
    TargetState,
    Track,
    default_model_set,
    generate_measurements,
    generate_track,
)
from .tfot import TfotFit, fit_tfot, sample_tfot
from .tracker import TrackerConfig, TrackEstimate, run_track, track_step
from .evaluate import McReport, monte_carlo

__version__ = "0.1.0"

__all__ = [
    "ConvertedMeasurement",
    "DynamicModel",
    "ImmConfig",
    "ImmEstimate",
    "InitRanges",
    "McReport",
    "MupoTensor",
    "PolarMeasurement",
    "RadarParams",
    "RasterConfig",
    "RasterRegion",
    "ScenarioConfig",
    "TargetState",
    "TfotFit",
    "Track",
    "TrackEstimate",
    "TrackerConfig",
    "assemble",
    "build_region",
    "default_bank",
    "default_model_set",
    "fit_tfot",
    "generate_measurements",
    "generate_track",
    "imm_step",
    "init_from_measurements",
    "linearized_cartesian_cov",
    "markov_pi",
    "monte_carlo",
    "mucm_convert",
    "propagate_snr",
    "run_track",
    "sample_tfot",
    "snr_to_polar_sigma",
    "track_step",
    "wrap_angle",
    "__version__",
]
