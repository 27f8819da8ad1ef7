"""Simulator for market-based allocation of a shared CPU.

Proportional share, market proportional share and fixed-price mechanisms,
obedient and strategic users, and a load-sweep harness.
"""

from .core import RunRecord, SimConfig, Task, UserState, task_utility
from .engine import Simulation, run
from .harness import ExperimentSpec, load_sweep_spec, run_experiment
from .metrics import efficiency, mean_utility_per_host, optimal_utility

__all__ = [
    "ExperimentSpec", "RunRecord", "SimConfig", "Simulation", "Task", "UserState",
    "efficiency", "load_sweep_spec", "mean_utility_per_host", "optimal_utility", "run",
    "run_experiment", "task_utility",
]
