from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .io import csv_columns, read_csv, write_csv
from .plots import render_plots
from .scenario import RunTrace, ScenarioRun, run_scenario, run_subgradient_scenario

__all__ = [
    "ConfigError", "ScenarioConfig", "load_config", "parse_config",
    "csv_columns", "read_csv", "write_csv", "render_plots",
    "RunTrace", "ScenarioRun", "run_scenario", "run_subgradient_scenario",
]
