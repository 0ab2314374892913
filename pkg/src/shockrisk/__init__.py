"""Competing-risks failure times for two Poisson shock streams with a random threshold."""

from .analytic import EvalConfig, Model, Rates
from .schemes import LatticePoint, Scheme
from .simulator import SimConfig, SimOutcome
from .special import NonConvergenceError, SeriesBudget
from .thresholds import (
    DIVERGENT,
    Custom,
    Deterministic,
    Geometric,
    Harmonic,
    NegBinomial2,
    ShiftedPoisson,
    ThresholdDistribution,
    ThresholdError,
)

__version__ = "0.1.0"

__all__ = [
    "DIVERGENT",
    "Custom",
    "Deterministic",
    "EvalConfig",
    "Geometric",
    "Harmonic",
    "LatticePoint",
    "Model",
    "NegBinomial2",
    "NonConvergenceError",
    "Rates",
    "Scheme",
    "SeriesBudget",
    "ShiftedPoisson",
    "SimConfig",
    "SimOutcome",
    "ThresholdDistribution",
    "ThresholdError",
]
