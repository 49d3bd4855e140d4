"""Pseudospectral simulator and verification lab for the 2-D
Navier-Stokes-Poisson system on a periodic box."""

from .spectral import CutoffFamily, Grid2D, SpectralField
from .linear import green_matrix, propagate_linear
from .solver import (CFLError, NumericalAbort, PrimitiveSolver, PrimitiveState,
                     SimulationParams, VacuumError)
from .splitting import SplitSolver, SplitState, lifespan_probe
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .initial import generate_initial

__version__ = "0.1.0"
