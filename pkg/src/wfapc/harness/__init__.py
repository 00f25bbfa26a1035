from .config import ConfigError, ScenarioConfig
from .metrics import RunMetrics, compare_cases, rms_error
from .signals import ReferenceSignal
from .simulate import NumericalFailure, RunResult, Simulation, run_scenario

__all__ = ["ConfigError", "NumericalFailure", "ReferenceSignal", "RunMetrics", "RunResult",
           "ScenarioConfig", "Simulation", "compare_cases", "rms_error", "run_scenario"]
