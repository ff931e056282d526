"""Experiment harness: configs, seeded sweeps, CSV and SVG output."""
from .config import ConfigError, ExperimentSpec, Scenario, parse_config, parse_text, validate
from .runner import RunResult, run

__all__ = ["ConfigError", "ExperimentSpec", "RunResult", "Scenario", "parse_config",
           "parse_text", "run", "validate"]
