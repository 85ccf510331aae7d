"""Overlapping Schwarz coupling of subdomain PINNs and finite-difference
models for the 1D steady advection-diffusion problem."""

from .estimators import FiniteDifferenceSolver, PINNRegressor, SchwarzSolver
from .fom import FomGrid, reference_solution, solve_fd, thomas_solve
from .pinn import DbcMode, LossWeights, SubdomainPinn
from .problem import BvpSpec, analytic_solution, decompose, sample_collocation
from .schwarz import SchwarzConfig, SchwarzResult, Status, run

__version__ = "0.1.0"

__all__ = [
    "BvpSpec",
    "DbcMode",
    "FiniteDifferenceSolver",
    "FomGrid",
    "LossWeights",
    "PINNRegressor",
    "SchwarzConfig",
    "SchwarzResult",
    "SchwarzSolver",
    "Status",
    "SubdomainPinn",
    "analytic_solution",
    "decompose",
    "reference_solution",
    "run",
    "sample_collocation",
    "solve_fd",
    "thomas_solve",
]
