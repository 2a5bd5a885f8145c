"""Seeded experiment runners and the command line interface."""

from .config import ConfigError, ExperimentConfig, load_config
from .runs import run_audit_suite, run_counterexample_j, run_ratio_convergence
