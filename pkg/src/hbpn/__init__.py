"""Hierarchical back-projection network for single-image super-resolution, in numpy."""

from .config import TrainConfig, load_config
from .errors import ConfigError, DataError, TrainingAborted
from .network import HBPNModel, ModelConfig, hbpn_forward

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "HBPNModel", "ModelConfig", "TrainConfig", "TrainingAborted",
    "hbpn_forward", "load_config",
]
