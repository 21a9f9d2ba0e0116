"""Exact-diagonalization toolkit for excited-state quantum phases of the Rabi
and Dicke models, built around the conserved sign of the field quadrature."""

__version__ = "0.1.0"

from .model import ModelParams, build_hamiltonian, critical_values, parity_operator, reduced_energy
from .precision import Precision
from .signop import build_c, gauge_fix_doublet
from .spectral import SpectralDecomposition, diagonalize, solve

__all__ = [
    "ModelParams",
    "Precision",
    "SpectralDecomposition",
    "build_c",
    "build_hamiltonian",
    "critical_values",
    "diagonalize",
    "gauge_fix_doublet",
    "parity_operator",
    "reduced_energy",
    "solve",
]
