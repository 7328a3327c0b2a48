"""Pilot-wave Klein-Gordon simulator: forced 1D field, relativistic guided
particle, seeded ensembles, and Born-density comparison."""

from .config import (
    Grid,
    PhysicalParams,
    RunConfig,
    config_digest,
    default_config,
    load_config,
    make_grid,
    save_config,
    validate,
)
from .ensemble import (
    EnsembleResult,
    TrajectoryRecord,
    calibrate,
    load,
    normalize_forcing,
    run_ensemble,
    run_single,
    save,
)

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "PhysicalParams",
    "RunConfig",
    "config_digest",
    "default_config",
    "load_config",
    "make_grid",
    "save_config",
    "validate",
    "EnsembleResult",
    "TrajectoryRecord",
    "calibrate",
    "load",
    "normalize_forcing",
    "run_ensemble",
    "run_single",
    "save",
    "__version__",
]
