"""Socially aware relay selection for monitoring critical urban events in
vehicular networks, with a restricted-flooding baseline for comparison."""

from .config import ScenarioConfig, load_config, preset
from .experiments import run_comparison, run_sweep
from .simulation import Simulation, run

__all__ = [
    "ScenarioConfig",
    "Simulation",
    "load_config",
    "preset",
    "run",
    "run_comparison",
    "run_sweep",
]
