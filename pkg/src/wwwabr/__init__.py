"""Cell-level simulation of bursty WWW traffic over TCP over ATM ABR with
ERICA+ explicit-rate switches."""

from .engine import Simulator
from .metrics import RunMetrics, compute_efficiency, run_scenario
from .scenario import ScenarioConfig, build_kn, parse_config

__version__ = "0.1.0"

__all__ = [
    "RunMetrics", "ScenarioConfig", "Simulator", "build_kn", "compute_efficiency",
    "parse_config", "run_scenario",
]
