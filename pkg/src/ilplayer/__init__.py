"""Exact integer linear programming as a differentiable layer."""

from .comboptnet import BackwardConfig, BasisMode, CombOptNetLayer, backward, decompose
from .constraints import ConstraintSet, Parametrization, random_init, to_matrix_form
from .ilp_solver import IlpInstance, SolveStatus, solve_brute_force, solve_ilp, solve_lp_relaxation
from .lattice import Lattice

__version__ = "0.1.0"

__all__ = [
    "BackwardConfig", "BasisMode", "CombOptNetLayer", "ConstraintSet", "IlpInstance", "Lattice",
    "Parametrization", "SolveStatus", "backward", "decompose", "random_init", "solve_brute_force",
    "solve_ilp", "solve_lp_relaxation", "to_matrix_form",
]
