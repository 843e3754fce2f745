"""Simulation and verification toolkit for a pendulum driven by spiking torque pulses."""

__version__ = "0.1.0"

from .errors import (
    AmplitudeCollapse,
    ConfigError,
    EventLocalizationFailure,
    InitialStateOutsideCD,
    IntegrationFailure,
    ParamOutOfRange,
    SolverError,
    StagnationError,
    TimeOutsideDomain,
    ToolkitError,
)
from .hybrid_core import (
    FlowSegment,
    HybridArc,
    HybridSystemDef,
    HybridTime,
    JumpRecord,
    SolverConfig,
    arc_eval,
    domain_check,
    run_hybrid,
    sample_arc,
)
from .pendulum_model import PendulumState, SystemParams, build_hybrid_system

__all__ = [
    "AmplitudeCollapse",
    "ConfigError",
    "EventLocalizationFailure",
    "FlowSegment",
    "HybridArc",
    "HybridSystemDef",
    "HybridTime",
    "InitialStateOutsideCD",
    "IntegrationFailure",
    "JumpRecord",
    "ParamOutOfRange",
    "PendulumState",
    "SolverConfig",
    "SolverError",
    "StagnationError",
    "SystemParams",
    "TimeOutsideDomain",
    "ToolkitError",
    "__version__",
    "arc_eval",
    "build_hybrid_system",
    "domain_check",
    "run_hybrid",
    "sample_arc",
]
