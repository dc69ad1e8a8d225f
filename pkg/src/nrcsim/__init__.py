"""Closed-form and Monte Carlo performance of ZF/MRT massive-MIMO downlink
under channel non-reciprocity and imperfect CSI."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    DimensionError,
    NrcAggregates,
    NrcsimError,
    NrcStats,
    PilotError,
    PrecoderKind,
    RangeError,
    StatsError,
    SystemConfig,
    ValidationError,
    db_to_linear,
    linear_to_db,
    nrc_aggregates,
    validate_config,
)
from .analytic import (  # noqa: E402
    AnalyticResult,
    CouplingRule,
    Infeasible,
    NotApplicable,
    SaturationUnbounded,
    evaluate,
    max_tolerable_nrc,
    sinr,
    sinr_all,
    spectral_efficiency,
)
from .montecarlo import McEstimate, estimate_sinr  # noqa: E402
from .experiments import SweepRow, SweepSpec, run_sweep  # noqa: E402
from .io import ParseError, emit_csv, parse_config  # noqa: E402

__all__ = [
    "AnalyticResult", "CouplingRule", "DimensionError", "Infeasible", "McEstimate",
    "NotApplicable", "NrcAggregates", "NrcStats", "NrcsimError", "ParseError", "PilotError",
    "PrecoderKind", "RangeError", "SaturationUnbounded", "StatsError", "SweepRow", "SweepSpec",
    "SystemConfig", "ValidationError", "db_to_linear", "emit_csv", "estimate_sinr", "evaluate",
    "linear_to_db", "max_tolerable_nrc", "nrc_aggregates", "parse_config", "run_sweep", "sinr",
    "sinr_all", "spectral_efficiency", "validate_config",
]
