"""Pseudospectral Navier-Stokes on a box with slip walls, with audits of the pressure and theta-energy estimates."""

from .domain import BoxDomain
from .evolve import SimConfig, initial_condition, run
from .fields import VectorField, VelocityField
from .spectral import CoefficientTensor, Parity

__all__ = [
    "BoxDomain",
    "CoefficientTensor",
    "Parity",
    "SimConfig",
    "VectorField",
    "VelocityField",
    "initial_condition",
    "run",
]
__version__ = "0.1.0"
