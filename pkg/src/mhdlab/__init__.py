"""Pseudo-spectral incompressible MHD on the periodic torus with magnetic-topology analysis."""

from .errors import CflError, ConfigError, GridError, NumericalError, ResolutionError, VerificationError
from .spectral import Grid, NormSeries, SpectralField
from .solver import MhdParams, MhdState, RunRecord, evolve, step
from .scenarios import ScenarioConfig, run_scenario

__version__ = "0.1.0"

__all__ = [
    "CflError", "ConfigError", "GridError", "NumericalError", "ResolutionError", "VerificationError",
    "Grid", "NormSeries", "SpectralField", "MhdParams", "MhdState", "RunRecord", "evolve", "step",
    "ScenarioConfig", "run_scenario",
]
