from .labels import TepLabels, assign_labels
from .losses import (
    LabelBatch,
    loss_confidence,
    loss_constraint,
    loss_detection,
    loss_regression,
    total_loss,
)
from .net import (
    Detection,
    MupoNet,
    NetConfig,
    TepGrid,
    build_network,
    decode,
    forward_grid,
    load_checkpoint,
    normalize_tensor,
    save_checkpoint,
)
from .train import EpochLog, TrainResult, TrainSample, train

__all__ = [
    "TepLabels",
    "assign_labels",
    "LabelBatch",
    "loss_confidence",
    "loss_constraint",
    "loss_detection",
    "loss_regression",
    "total_loss",
    "Detection",
    "MupoNet",
    "NetConfig",
    "TepGrid",
    "build_network",
    "decode",
    "forward_grid",
    "load_checkpoint",
    "normalize_tensor",
    "save_checkpoint",
    "EpochLog",
    "TrainResult",
    "TrainSample",
    "train",
]
