"""Scenario definition, closed-loop simulation, metrics, sweeps and the CLI."""
from .config import (CONTROLLERS, PathConfig, ScenarioConfig, SimConfig, SpeedConfig,
                     SpeedControlConfig, dump_config, load_config, save_config)
from .envelope import EnvelopeFit, fit_envelope
from .metrics import Metrics, compare_runs, compute_metrics, delta_rms
from .scenario import PathReference, SpeedController, speed_target
from .simulate import SimLog, log_to_csv, read_log, run_scenario, write_log
from .sweep import STANDARD_SWEEPS, StepFeatures, step_features, sweep

__all__ = [
    "CONTROLLERS", "PathConfig", "ScenarioConfig", "SimConfig", "SpeedConfig",
    "SpeedControlConfig", "dump_config", "load_config", "save_config", "EnvelopeFit",
    "fit_envelope", "Metrics", "compare_runs", "compute_metrics", "delta_rms",
    "PathReference", "SpeedController", "speed_target", "SimLog", "log_to_csv", "read_log",
    "run_scenario", "write_log", "STANDARD_SWEEPS", "StepFeatures", "step_features", "sweep",
]
