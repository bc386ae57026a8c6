from .results import ResultMetadata, ResultTable
from .scenario import (
    AnalysisSpec,
    LinkSpec,
    OutputSpec,
    ScenarioFile,
    SimulationSpec,
    SystemSpec,
)

__all__ = [
    "AnalysisSpec",
    "LinkSpec",
    "OutputSpec",
    "ResultMetadata",
    "ResultTable",
    "ScenarioFile",
    "SimulationSpec",
    "SystemSpec",
]
