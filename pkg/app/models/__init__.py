from .loop import AoiState, ControllerMemory, LoopState
from .simulation import (
    STATIONARY,
    Axis,
    ComparisonRow,
    InflectionPoint,
    OutagePoint,
    RateEstimate,
    Regime,
    RunStats,
    Scenario,
    VarianceConvention,
)
from .system import LinkMode, LinkModel, SystemModel

__all__ = [
    "AoiState",
    "ControllerMemory",
    "LoopState",
    "STATIONARY",
    "Axis",
    "ComparisonRow",
    "InflectionPoint",
    "OutagePoint",
    "RateEstimate",
    "Regime",
    "RunStats",
    "Scenario",
    "VarianceConvention",
    "LinkMode",
    "LinkModel",
    "SystemModel",
]
