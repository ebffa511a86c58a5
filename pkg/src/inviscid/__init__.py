"""Vanishing-viscosity toolkit for 2D vorticity with bounded data on the torus."""

from .spectral import GridSpec, biot_savart, read_snapshot, write_snapshot
from .dynamics import SimulationConfig, Trajectory, VelocityArchive, evolve
from .fields import make_field, random_besov, vortex_patch, PatchSpec
from .config import ExperimentSpec, load_config, parse_config
from .experiments import REGISTRY, run_experiment

__all__ = [
    "GridSpec", "biot_savart", "read_snapshot", "write_snapshot",
    "SimulationConfig", "Trajectory", "VelocityArchive", "evolve",
    "make_field", "random_besov", "vortex_patch", "PatchSpec",
    "ExperimentSpec", "load_config", "parse_config",
    "REGISTRY", "run_experiment",
]
__version__ = "0.1.0"
