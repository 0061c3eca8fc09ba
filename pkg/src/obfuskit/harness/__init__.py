"""Experiment configs, scenario pipelines and the command line."""

from obfuskit.harness.config import ExperimentConfig, load_config, parse_config
from obfuskit.harness.runner import RunReport, run_experiment

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "RunReport",
    "run_experiment",
]
