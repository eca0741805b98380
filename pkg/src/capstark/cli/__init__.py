"""Configuration, orchestration and plot-data output."""
from .config import ConfigError, ExperimentConfig, config_hash, load_config, parse_config
from .main import main
from .plots import MissingArtifact, emit_plots, loglog_slope
from .runner import ExitReport, resolve, run

__all__ = ["ConfigError", "ExperimentConfig", "config_hash", "load_config", "parse_config", "ExitReport",
           "resolve", "run", "main", "MissingArtifact", "emit_plots", "loglog_slope"]
