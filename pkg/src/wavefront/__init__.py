"""Decoding-wave velocities for spatially coupled LDPC ensembles."""

from .ensemble import DegreePolynomial, Ensemble, parse_ensemble, regular
from .profiles import SolverGrid

__all__ = [
    "DegreePolynomial",
    "Ensemble",
    "SolverGrid",
    "parse_ensemble",
    "regular",
]
__version__ = "0.1.0"
