"""Random field ``u(t, x) = Y_t^{t,x}`` on a grid of starting points.

Every grid point gets its own forward/backward solve from the frozen start
``(t, x)``; all points share the forward noise (common random numbers) and the
single backward path of the scenario.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import convex
from .backward import SolverConfig, solve_backward_row
from .coefficients import CoefficientSet
from .convex import ConvexSpec
from .errors import BadParameter
from .forward import CheckpointedForward, DomainSpec, TOL_PROJ
from .noise import PathBundle, TimeGrid, sample_noise

log = logging.getLogger(__name__)

# cache forward increments for field sweeps below this many floats (~0.5 GB)
_CACHE_LIMIT = 64_000_000


@dataclass
class FieldGrid:
    times: list[float]
    points: list[list[float]]
    scenario_seed: int | None = None

    def __post_init__(self):
        self.times = [float(t) for t in self.times]
        self.points = [list(np.atleast_1d(np.asarray(p, dtype=float))) for p in self.points]
        if not self.times or not self.points:
            raise BadParameter("field grid needs at least one time and one point")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise BadParameter("field times must be strictly ascending")


@dataclass
class FieldResult:
    times: np.ndarray
    points: np.ndarray
    u: np.ndarray
    std_err: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def rows(self):
        """``(t, x_1, ..., x_d, u, std_err)`` tuples in (time, point) order."""
        for i, t in enumerate(self.times):
            for j, x in enumerate(self.points):
                yield (float(t), *map(float, x), float(self.u[i, j]), float(self.std_err[i, j]))


def build_field(grid: FieldGrid, dom: DomainSpec, coeffs: CoefficientSet, phi: ConvexSpec, psi: ConvexSpec,
                config: SolverConfig, time_grid: TimeGrid, M: int, seed: int,
                bundle: PathBundle | None = None, threads: int = 1) -> FieldResult:
    """Solve for ``u`` at every ``(t, x)`` of ``grid``.

    ``bundle`` overrides the noise built from ``(time_grid, M, seed)`` and
    ``grid.scenario_seed``.
    """
    if bundle is None:
        bundle = sample_noise(time_grid, M, dom.dim, seed, scenario_seed=grid.scenario_seed)
    time_grid = bundle.grid
    idx = [time_grid.index_of(t) for t in grid.times]
    pts = np.array(grid.points, dtype=float)
    if pts.shape[1] != dom.dim:
        raise BadParameter(f"field points must have {dom.dim} coordinates")
    if np.any(dom.phi(pts) < -TOL_PROJ):
        raise BadParameter("every field point must lie in the closed domain")
    if bundle.M * time_grid.N * bundle.d <= _CACHE_LIMIT:
        bundle.cache_increments()
    u = np.empty((len(idx), len(pts)))
    se = np.zeros_like(u)
    for i, k in enumerate(idx):
        for j, x in enumerate(pts):
            if k == time_grid.N:
                u[i, j] = coeffs.chi(x[None, :])[0]
                continue
            fwd = CheckpointedForward(dom, coeffs, x, bundle, start_index=k, threads=threads)
            row, _, path_se = solve_backward_row(fwd, bundle, coeffs, phi, psi, config, stop_index=k)
            # all paths sit at x at node k, so the row is constant across paths
            u[i, j] = float(row.mean())
            se[i, j] = path_se
            log.debug("u(%g, %s) = %g +/- %g", grid.times[i], x, u[i, j], se[i, j])
    bundle.drop_cache()
    meta = {"M": bundle.M, "N": time_grid.N, "T": time_grid.T, "seed": bundle.seed,
            "scenario_seed": bundle.scenario_seed}
    return FieldResult(np.array(grid.times), pts, u, se, meta)


def _pair_slope(coords: np.ndarray, values: np.ndarray) -> float | None:
    # log-log slope of mean squared increments against separation, grouped by separation
    n = len(coords)
    if n < 3:
        return None
    groups: dict[float, list[float]] = {}
    for a in range(n):
        for b in range(a + 1, n):
            dist = float(np.linalg.norm(np.atleast_1d(coords[a] - coords[b])))
            if dist <= 0:
                continue
            inc = values[..., a] - values[..., b]
            groups.setdefault(round(dist, 9), []).extend(np.atleast_1d(inc**2).tolist())
    dists = sorted(groups)
    msq = np.array([np.mean(groups[dd]) for dd in dists])
    if len(dists) < 2 or np.any(msq <= 0):
        return None
    return float(np.polyfit(np.log(dists), np.log(msq), 1)[0])


def field_diagnostics(result: FieldResult, dom: DomainSpec, phi: ConvexSpec, psi: ConvexSpec,
                      coeffs: CoefficientSet) -> dict[str, Any]:
    """Continuity and admissibility report for a computed field.

    Keys: ``max_jump_x``, ``max_jump_t``, ``exponent_x``, ``exponent_t``
    (log-log slopes of mean-square increments, None when there are fewer than
    three distinct separations), ``membership_violations`` and
    ``terminal_mismatch``.
    """
    u = result.u
    nt, nx = u.shape
    if nt < 2 or nx < 2:
        raise BadParameter("diagnostics need at least 2 times and 2 points")
    on_bd = np.abs(dom.phi(result.points)) <= TOL_PROJ
    terminal = bool(np.isclose(result.times[-1], result.meta.get("T", np.nan)))
    # the terminal row is chi itself and need not lie in the constraint sets
    inner = u[:-1] if terminal else u
    ok_phi = convex.in_domain(phi, inner)
    ok_psi = convex.in_domain(psi, inner)
    violations = int(np.sum(~ok_phi[:, ~on_bd]) + np.sum(~(ok_phi & ok_psi)[:, on_bd]))
    mismatch = 0
    if terminal:
        chi = coeffs.chi(result.points)
        mismatch = int(np.sum(u[-1] != chi))
    return {
        "max_jump_x": float(np.max(np.abs(np.diff(u, axis=1)))),
        "max_jump_t": float(np.max(np.abs(np.diff(u, axis=0)))),
        "exponent_x": _pair_slope(result.points, u),
        "exponent_t": _pair_slope(result.times, u.T),
        "membership_violations": violations,
        "terminal_mismatch": mismatch,
    }
