"""Planetary-scale 4D space-time positional encoding.

Four multi-resolution 3D hash grids over the axis projections of normalized
(x, y, z, t) points, with learned hash probing, a regression head, a
collision-analysis lab, and a CLI.
"""

from .backends import BACKEND
from .encoder import Earth4DConfig, Earth4DEncoder, PROJECTIONS, count_parameters
from .errors import CheckpointError, DomainError, TrainingDivergedError
from .geocoords import (
    GeodeticPoint,
    NormalizationConfig,
    denormalize,
    normalize,
    normalize_batch,
    parse_time,
)
from .hashgrid import GridConfig, HashGrid, LevelSpec, build_levels
from .persistence import load_checkpoint, save_checkpoint
from .probing import ProbeConfig
from .regressor import (
    LFMCRegressor,
    Metrics,
    RegressorConfig,
    SpeciesTable,
    TrainConfig,
    compute_metrics,
    evaluate,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CheckpointError",
    "DomainError",
    "Earth4DConfig",
    "Earth4DEncoder",
    "GeodeticPoint",
    "GridConfig",
    "HashGrid",
    "LFMCRegressor",
    "LevelSpec",
    "Metrics",
    "NormalizationConfig",
    "PROJECTIONS",
    "ProbeConfig",
    "RegressorConfig",
    "SpeciesTable",
    "TrainConfig",
    "TrainingDivergedError",
    "build_levels",
    "compute_metrics",
    "count_parameters",
    "denormalize",
    "evaluate",
    "load_checkpoint",
    "normalize",
    "normalize_batch",
    "parse_time",
    "save_checkpoint",
    "train",
    "__version__",
]
