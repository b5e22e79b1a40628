"""Configuration, sweeps, rate fitting, acceptance experiments and the CLI."""

from .config import ConfigError, RunConfig, load_config, parse_config
from .experiments import ExperimentResult, run_experiment
from .rates import fit_rate
from .sweep import SweepReport, run_sweep

__all__ = ["ConfigError", "ExperimentResult", "RunConfig", "SweepReport", "fit_rate", "load_config",
           "parse_config", "run_experiment", "run_sweep"]
