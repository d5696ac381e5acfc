"""Monte Carlo solver for constrained doubly stochastic BSDEs with reflected forward diffusions."""
from .backward import BackwardSolution, SolverConfig, conditional_moments, constraint_step, picard_solve, solve_backward
from .coefficients import CoefficientSet, make_coefficient
from .convex import ConvexSpec, moreau_envelope, resolvent, subdiff_interval, yosida_gradient
from .doss_sussmann import FlowSpec, eta_flow, eta_inverse, transform_coefficients
from .errors import VibdsdeError
from .field import FieldGrid, build_field, field_diagnostics
from .forward import DomainSpec, domain_geometry, reflect_step, simulate_forward
from .noise import PathBundle, TimeGrid, make_time_grid, sample_noise
from .problem import Problem, run_problem

__version__ = "0.1.0"

__all__ = [
    "BackwardSolution", "CoefficientSet", "ConvexSpec", "DomainSpec", "FieldGrid", "FlowSpec", "PathBundle",
    "Problem", "SolverConfig", "TimeGrid", "VibdsdeError", "build_field", "conditional_moments",
    "constraint_step", "domain_geometry", "eta_flow", "eta_inverse", "field_diagnostics", "make_coefficient",
    "make_time_grid", "moreau_envelope", "picard_solve", "reflect_step", "resolvent", "run_problem",
    "sample_noise", "simulate_forward", "solve_backward", "subdiff_interval", "transform_coefficients",
    "yosida_gradient",
]
