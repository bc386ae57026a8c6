from .aoi_service import AoiService
from .control_service import ControlLoopService
from .montecarlo_service import MonteCarloService
from .outage_service import OutageService
from .scenario_service import ScenarioService
from .storage_service import StorageService

__all__ = [
    "AoiService",
    "ControlLoopService",
    "MonteCarloService",
    "OutageService",
    "ScenarioService",
    "StorageService",
]
