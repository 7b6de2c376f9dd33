# Licensed under the MIT License

"""favs: frequency-aware audio-visual fusion.

Reference implementation of a frequency-domain decomposer and a
mixture-of-experts cross-modal consistency module for audio-visual
segmentation, with synthetic fixtures and a command-line driver.
"""

from . import errors, fded, fixtures, ften, metrics, parameters, pipeline, scmc, spectral, tensor
from .errors import ConfigError, FavsError, FtenError, ShapeError, ValidationError
from .fded import FdedParams, fded_forward
from .fixtures import SceneFixture, gen_scene, mel_proxy
from .ften import read_ften, write_ften
from .metrics import metric_fscore, metric_jaccard
from .pipeline import FavsParams, ModelConfig, Prediction, StageState, decode_masks, derive_queries, run_stages
from .scmc import RoutingDecision, ScmcParams, scmc_forward
from .spectral import BandSet, ThresholdLadder, residual_decompose

# Local imports
from .logging import debug, info, warning, error, critical

__all__ = [
    "errors",
    "fded",
    "fixtures",
    "ften",
    "metrics",
    "parameters",
    "pipeline",
    "scmc",
    "spectral",
    "tensor",
    "ConfigError",
    "FavsError",
    "FtenError",
    "ShapeError",
    "ValidationError",
    "FdedParams",
    "fded_forward",
    "SceneFixture",
    "gen_scene",
    "mel_proxy",
    "read_ften",
    "write_ften",
    "metric_fscore",
    "metric_jaccard",
    "FavsParams",
    "ModelConfig",
    "Prediction",
    "StageState",
    "decode_masks",
    "derive_queries",
    "run_stages",
    "RoutingDecision",
    "ScmcParams",
    "scmc_forward",
    "BandSet",
    "ThresholdLadder",
    "residual_decompose",
]

# Add logging functions
__all__ += ["debug", "info", "warning", "error", "critical"]
