"""Config-driven sweeps, CSV output and power-law fits."""
from .config import ConfigError, ExperimentConfig, default_config, load_config, parse_config
from .fit import FitError, FitResult, fit_power_law, fit_power_law_xy
from .io import read_results, rows_to_csv, write_results
from .runner import COLUMNS, ExperimentError, columns_for, run_experiment

__all__ = ["ConfigError", "ExperimentConfig", "default_config", "load_config", "parse_config", "FitError",
           "FitResult", "fit_power_law", "fit_power_law_xy", "read_results", "rows_to_csv", "write_results",
           "COLUMNS", "ExperimentError", "columns_for", "run_experiment"]
