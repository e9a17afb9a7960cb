"""Two-level adaptive cruise control simulation for a three-vehicle platoon."""

from .controller import AccController, ControlMode, ControllerConfig, PidGains, SsdParams
from .dynamics import ActuatorCommand, VehicleParams, VehicleState
from .engine import TraceLog, read_trace_csv, run_simulation
from .scenario import Scenario, load_scenario, load_scenario_file
from .sensing import HEAVY_RAIN, NO_RAIN, WeatherCondition

__version__ = "0.1.0"

__all__ = [
    "AccController", "ActuatorCommand", "ControlMode", "ControllerConfig", "HEAVY_RAIN",
    "NO_RAIN", "PidGains", "Scenario", "SsdParams", "TraceLog", "VehicleParams",
    "VehicleState", "WeatherCondition", "load_scenario", "load_scenario_file",
    "read_trace_csv", "run_simulation",
]
