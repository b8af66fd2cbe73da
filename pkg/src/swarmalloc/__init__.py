"""Seed-reproducible swarm task-allocation simulator (RW, HHTA, PROP)."""

from .config import ExperimentConfig, parse_config
from .grid import GridWorld, TrialTrace, build_world, neighborhood, run_trial, step
from .harness import SweepPoint, compare, run_sweep, simulate
from .rng import RngStream
from .tasks import ConfigurationError, HomeRect, TaskSpec, VertexState

__all__ = [
    "ConfigurationError",
    "ExperimentConfig",
    "GridWorld",
    "HomeRect",
    "RngStream",
    "SweepPoint",
    "TaskSpec",
    "TrialTrace",
    "VertexState",
    "build_world",
    "compare",
    "neighborhood",
    "parse_config",
    "run_sweep",
    "run_trial",
    "simulate",
    "step",
]
