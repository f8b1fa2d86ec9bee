"""Staggered Lax-Friedrichs schemes for periodic conservation laws and Hamilton-Jacobi equations."""
from .flux import FluxModel, apriori_constants, get_model, lagrangian, legendre, verify_assumptions
from .grid import EVEN, ODD, GridField, StaggeredGrid, discretize_u0, discretize_v0, integrate_u, u_from_v
from .scheme import CFLViolation, SchemeConfig, Trajectory, cfl_margin, solve, step_u, step_v
from .periodic import EffectiveCurve, PeriodicState, effective_hamiltonian, find_periodic_u, periodic_v, sweep
from .estimators import EffectiveHamiltonian, LaxFriedrichsSolver, PeriodicSolver

__version__ = "0.1.0"

__all__ = [
    "CFLViolation",
    "EVEN",
    "EffectiveCurve",
    "EffectiveHamiltonian",
    "FluxModel",
    "GridField",
    "LaxFriedrichsSolver",
    "ODD",
    "PeriodicSolver",
    "PeriodicState",
    "SchemeConfig",
    "StaggeredGrid",
    "Trajectory",
    "apriori_constants",
    "cfl_margin",
    "discretize_u0",
    "discretize_v0",
    "effective_hamiltonian",
    "find_periodic_u",
    "get_model",
    "integrate_u",
    "lagrangian",
    "legendre",
    "periodic_v",
    "solve",
    "step_u",
    "step_v",
    "sweep",
    "u_from_v",
    "verify_assumptions",
]
