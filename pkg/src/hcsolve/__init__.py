"""Adaptive sparse spectral solver for PDEs on unbounded domains."""

from .adaptive import AdaptiveConfig, AdaptiveState, IndicatorMode, adapt
from .basis import BasisParams, Family
from .cli import RunConfig, parse_config, run
from .estimator import HyperbolicCrossSolver
from .field import SpectralField
from .sparse_index import FULL_TENSOR, CrossIndexSet

__version__ = "0.1.0"

__all__ = [
    "AdaptiveConfig", "AdaptiveState", "IndicatorMode", "adapt", "BasisParams", "Family",
    "RunConfig", "parse_config", "run", "HyperbolicCrossSolver", "SpectralField",
    "FULL_TENSOR", "CrossIndexSet",
]
