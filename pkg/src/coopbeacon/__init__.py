"""Cooperative safety-beacon verification with one-way key chains, shared
verification results, and a deterministic discrete-event simulator."""

from .config import ConfigError, ExperimentSpec, SimConfig
from .metrics import MetricsReport, RunMetrics
from .simulator import run, run_single

__all__ = ["SimConfig", "ExperimentSpec", "ConfigError", "MetricsReport",
           "RunMetrics", "run", "run_single"]
__version__ = "0.1.0"
