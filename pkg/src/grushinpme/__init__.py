"""Finite-difference laboratory for the porous medium equation driven by the Baouendi-Grushin operator."""

from .grid import DomainSpec, Grid, build_grid, homogeneous_dimension, integrate, validate_domain
from .operator import SparseOperator, apply, assemble, grad_energy
from .source import ConcavityParams, SourceModel, F_eval, f_eval
from .spectral import rayleigh_quotient, smallest_eigenvalue, verify_poincare

__version__ = "0.1.0"
