"""A fully specified forward-backward problem and the glue to solve it."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .backward import BackwardSolution, SolverConfig, picard_solve, solve_backward
from .coefficients import CoefficientSet
from .convex import ConvexSpec
from .forward import DomainSpec, ForwardBatch, simulate_forward
from .noise import PathBundle, TimeGrid, make_time_grid, sample_noise


@dataclass
class Problem:
    dom: DomainSpec = field(default_factory=DomainSpec.whole_space)
    coeffs: CoefficientSet = field(default_factory=CoefficientSet)
    phi: ConvexSpec = field(default_factory=ConvexSpec.zero)
    psi: ConvexSpec = field(default_factory=ConvexSpec.zero)
    x0: tuple[float, ...] = (0.0,)
    grid: TimeGrid = field(default_factory=lambda: make_time_grid(0.0, 1.0, 100))
    M: int = 1000
    seed: int = 0
    scenario_seed: int | None = None
    config: SolverConfig = field(default_factory=SolverConfig)

    def with_(self, **changes) -> Problem:
        return replace(self, **changes)

    def to_config(self) -> dict[str, Any]:
        return {
            "domain": self.dom.to_config(),
            "coefficients": self.coeffs.to_config(),
            "constraints": {"phi": self.phi.to_config(), "psi": self.psi.to_config()},
            "x0": [float(v) for v in self.x0],
            "grid": {"t0": self.grid.t0, "T": self.grid.T, "N": self.grid.N},
            "monte_carlo": {"M": self.M, "seed": self.seed, "scenario_seed": self.scenario_seed},
            "solver": self.config.to_config(),
        }

    def config_hash(self) -> str:
        return config_hash(self.to_config())

    def bundle(self, B: np.ndarray | None = None) -> PathBundle:
        return sample_noise(self.grid, self.M, self.dom.dim, self.seed, scenario_seed=self.scenario_seed, B=B)


def config_hash(cfg: dict[str, Any]) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_forward(problem: Problem, bundle: PathBundle | None = None, start_index: int = 0,
                threads: int = 1) -> tuple[ForwardBatch, PathBundle]:
    bundle = problem.bundle() if bundle is None else bundle
    fwd = simulate_forward(problem.dom, problem.coeffs, np.asarray(problem.x0, dtype=float), bundle,
                           start_index=start_index, threads=threads)
    return fwd, bundle


def run_problem(problem: Problem, bundle: PathBundle | None = None, fwd: ForwardBatch | None = None,
                threads: int = 1) -> tuple[BackwardSolution, ForwardBatch, PathBundle]:
    """Forward simulation plus backward solve; reuses ``fwd``/``bundle`` when given."""
    if fwd is None:
        fwd, bundle = run_forward(problem, bundle, threads=threads)
    sol = solve_backward(fwd, bundle, problem.coeffs, problem.phi, problem.psi, problem.config)
    return sol, fwd, bundle


def run_picard(problem: Problem, bundle: PathBundle | None = None, threads: int = 1):
    fwd, bundle = run_forward(problem, bundle, threads=threads)
    sol, iterations, residuals = picard_solve(fwd, bundle, problem.coeffs, problem.phi, problem.psi,
                                              problem.config)
    return sol, iterations, residuals, fwd, bundle
