"""Joint placement, association, and bandwidth optimization for cache-enabled
aerial base stations with a power-limited wireless backhaul."""

from .audit import AuditReport, check_solution
from .channel import ChannelParams, GeometryConstants, min_elevation
from .config import AppConfig, ConfigError, load_config, save_config
from .evaluation import (ExperimentConfig, InterferenceMode, MetricsTable,
                         empirical_cdf, interference_rates, run_monte_carlo,
                         write_runs_csv, write_summary_json)
from .orchestrator import Solution, SolverConfig, baseline, optimize
from .scenario import (GenerationConfig, PointProcessConfig, Scenario, User,
                       compute_cov, generate_scenario, load_scenario,
                       save_scenario)

__version__ = "0.1.0"

__all__ = [
    "AppConfig",
    "AuditReport",
    "ChannelParams",
    "ConfigError",
    "ExperimentConfig",
    "GenerationConfig",
    "GeometryConstants",
    "InterferenceMode",
    "MetricsTable",
    "PointProcessConfig",
    "Scenario",
    "Solution",
    "SolverConfig",
    "User",
    "baseline",
    "check_solution",
    "compute_cov",
    "empirical_cdf",
    "generate_scenario",
    "interference_rates",
    "load_config",
    "load_scenario",
    "min_elevation",
    "optimize",
    "run_monte_carlo",
    "save_config",
    "save_scenario",
    "write_runs_csv",
    "write_summary_json",
    "__version__",
]
