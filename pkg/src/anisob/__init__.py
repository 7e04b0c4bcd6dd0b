"""Pseudospectral 2-D Boussinesq solvers with one-directional dissipation,
a dyadic-decomposition norm toolkit, and inequality diagnostics."""

from .spectral import Grid, SpectralField, VectorField
from .solver import SimConfig, SimState, SystemKind, run

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "SpectralField",
    "VectorField",
    "SimConfig",
    "SimState",
    "SystemKind",
    "run",
    "__version__",
]
