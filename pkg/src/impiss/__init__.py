"""Simulation and ISS certification of impulsive systems with delay-dependent impulses."""

from .history import History, HistoryError, Jump, RangeError
from .integrator import DivergenceError, Trajectory, refine_check, simulate
from .model import (
    ExpDecayInput,
    ImpulseSchedule,
    ImpulsiveSystem,
    PiecewiseConstantInput,
    SinusoidInput,
    SplitMix64,
    ZeroInput,
    gen_periodic,
    gen_random_dwell,
    validate_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "ExpDecayInput",
    "History",
    "HistoryError",
    "ImpulseSchedule",
    "ImpulsiveSystem",
    "Jump",
    "PiecewiseConstantInput",
    "RangeError",
    "SinusoidInput",
    "SplitMix64",
    "Trajectory",
    "ZeroInput",
    "gen_periodic",
    "gen_random_dwell",
    "refine_check",
    "simulate",
    "validate_schedule",
]
