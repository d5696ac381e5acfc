"""Backward regression Monte Carlo scheme for the constrained doubly stochastic BSDE.

One backward step from node ``k+1`` to node ``k``::

    S   = Y[k+1] + g(t_k, X_k, Y[k+1]) dA_k + (backward-noise term in dB_k)
    z0  = E[S dW_k | X_k] / dt                       (only if f depends on z)
    R   = S + f(t_k, X_k, Y[k+1], z0) dt
    y~  = E[R | X_k],  Z_k = E[R dW_k | X_k] / dt
    (Y_k, U_k, V_k) = constraint_step(y~)

Conditional expectations over the forward noise are least-squares projections
on monomials of the (centred, scaled) state; the backward path is frozen, so
every node value is a function of the scenario.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import convex
from .coefficients import CoefficientSet, DriverConstant, DriverZero, NoiseZero
from .convex import ConvexSpec
from .errors import BadParameter, NonConvergence, RootFindFailure, ShapeMismatch
from .forward import ForwardBatch
from .noise import PathBundle

log = logging.getLogger(__name__)

RESOLVENT = "resolvent"
YOSIDA = "yosida"
PICARD = "picard"


@dataclass(frozen=True)
class SolverConfig:
    mode: str = RESOLVENT
    eps: float = 0.1
    inner_mode: str = RESOLVENT
    max_iter: int = 50
    tol: float = 1e-8
    basis_degree: int = 2
    z_clip: float | None = None
    noise_scheme: str = "milstein"

    def __post_init__(self):
        if self.mode not in (RESOLVENT, YOSIDA, PICARD):
            raise BadParameter(f"unknown solver mode {self.mode!r}")
        if self.inner_mode not in (RESOLVENT, YOSIDA):
            raise BadParameter(f"picard inner mode must be resolvent or yosida, got {self.inner_mode!r}")
        if (self.mode == YOSIDA or self.inner_mode == YOSIDA) and not self.eps > 0:
            raise BadParameter(f"Yosida eps must be > 0, got {self.eps}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise BadParameter(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0:
            raise BadParameter(f"tol must be > 0, got {self.tol}")
        if int(self.basis_degree) != self.basis_degree or self.basis_degree < 0:
            raise BadParameter(f"basis_degree must be an integer >= 0, got {self.basis_degree}")
        if self.z_clip is not None and not self.z_clip > 0:
            raise BadParameter(f"z_clip must be > 0 when set, got {self.z_clip}")
        if self.noise_scheme not in ("milstein", "euler"):
            raise BadParameter(f"noise_scheme must be 'milstein' or 'euler', got {self.noise_scheme!r}")

    @property
    def step_mode(self) -> str:
        return self.inner_mode if self.mode == PICARD else self.mode

    def to_config(self) -> dict[str, Any]:
        if self.mode == RESOLVENT:
            mode: Any = RESOLVENT
        elif self.mode == YOSIDA:
            mode = {YOSIDA: {"eps": self.eps}}
        else:
            inner = {"inner": self.inner_mode, "max_iter": self.max_iter, "tol": self.tol}
            if self.inner_mode == YOSIDA:
                inner["eps"] = self.eps
            mode = {PICARD: inner}
        return {"mode": mode, "basis_degree": self.basis_degree, "z_clip": self.z_clip,
                "noise_scheme": self.noise_scheme}

    @classmethod
    def from_config(cls, cfg: dict[str, Any] | None) -> SolverConfig:
        cfg = dict(cfg or {})
        extra = set(cfg) - {"mode", "basis_degree", "z_clip", "noise_scheme"}
        if extra:
            raise BadParameter(f"unexpected solver keys {sorted(extra)}")
        kw: dict[str, Any] = {k: cfg[k] for k in ("basis_degree", "z_clip", "noise_scheme") if k in cfg}
        mode = cfg.get("mode", RESOLVENT)
        if isinstance(mode, str):
            if mode != RESOLVENT:
                raise BadParameter(f"string solver mode must be 'resolvent', got {mode!r}")
            return cls(RESOLVENT, **kw)
        if not isinstance(mode, dict) or len(mode) != 1:
            raise BadParameter(f"solver mode must be 'resolvent' or a one-key object, got {mode!r}")
        (name, body), = mode.items()
        body = dict(body or {})
        if name == YOSIDA:
            if set(body) - {"eps"}:
                raise BadParameter(f"unexpected yosida keys {sorted(set(body) - {'eps'})}")
            return cls(YOSIDA, eps=float(body.get("eps", 0.1)), **kw)
        if name == PICARD:
            extra = set(body) - {"inner", "max_iter", "tol", "eps"}
            if extra:
                raise BadParameter(f"unexpected picard keys {sorted(extra)}")
            return cls(PICARD, inner_mode=body.get("inner", RESOLVENT), max_iter=int(body.get("max_iter", 50)),
                       tol=float(body.get("tol", 1e-8)), eps=float(body.get("eps", 0.1)), **kw)
        raise BadParameter(f"unknown solver mode {name!r}")


# ------------------------------------------------------------- regression
class _Projector:
    """Least-squares projection onto monomials of the state up to ``degree``."""

    def __init__(self, states: np.ndarray, degree: int):
        M, d = states.shape
        self.M = M
        self.fallback = False
        mean = states.mean(axis=0)
        std = states.std(axis=0)
        live = std > 1e-12 * np.maximum(1.0, np.abs(mean))
        if degree == 0 or not np.any(live):
            # constant state (frozen start): the mean is the exact projection
            self.basis = None
            return
        u = (states[:, live] - mean[live]) / std[live]
        cols = [np.ones(M)]
        for deg in range(1, degree + 1):
            for combo in itertools.combinations_with_replacement(range(u.shape[1]), deg):
                cols.append(np.prod(u[:, combo], axis=1))
        P = np.column_stack(cols)
        if M < P.shape[1]:
            self.basis, self.fallback = None, True
            return
        G = P.T @ P
        try:
            cond = np.linalg.cond(G)
        except np.linalg.LinAlgError:
            cond = np.inf
        if not np.isfinite(cond) or cond > 1e12:
            self.basis, self.fallback = None, True
            return
        self.basis = P
        self.G = G

    @property
    def n_terms(self) -> int:
        return 1 if self.basis is None else self.basis.shape[1]

    def fit(self, values: np.ndarray) -> np.ndarray:
        """Fitted values for each column of ``values`` (shape ``(M,)`` or ``(M, c)``)."""
        if self.basis is None:
            mean = values.mean(axis=0)
            return np.broadcast_to(mean, values.shape).copy()
        coef = np.linalg.solve(self.G, self.basis.T @ values)
        return self.basis @ coef


def conditional_moments(samples_next, states, dW_k, dt: float, basis_degree: int):
    """Regression estimates of ``E[S | X]`` and ``E[S dW | X] / dt``.

    Returns ``(y_tilde, z_hat, info)``; ``info["fallback"]`` is True when the
    normal equations were rank deficient and degree 0 (the sample mean) was
    used instead.
    """
    S = np.asarray(samples_next, dtype=float)
    X = np.asarray(states, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    dW = np.asarray(dW_k, dtype=float)
    if dW.ndim == 1:
        dW = dW[:, None]
    if not (S.shape[0] == X.shape[0] == dW.shape[0]):
        raise ShapeMismatch("samples, states and increments must share the path count")
    proj = _Projector(X, basis_degree)
    fitted = proj.fit(np.column_stack([S, S[:, None] * dW / dt]))
    resid = S - fitted[:, 0]
    se = math.sqrt(float(np.mean(resid**2)) * proj.n_terms / S.shape[0])
    return fitted[:, 0], fitted[:, 1:], {"fallback": proj.fallback, "se": se}


# ------------------------------------------------------------- constraints
def _bisect_monotone(F, lo, hi, iters=200):
    # vectorised bisection for increasing F with F(lo) <= 0 <= F(hi)
    flo, fhi = F(lo), F(hi)
    if np.any(flo > 0) or np.any(fhi < 0):
        raise RootFindFailure("monotone constraint equation is not bracketed")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = F(mid)
        pos = fm > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(mid))):
            break
    # the equation is piecewise linear: finish with one secant step on the final bracket
    flo, fhi = F(lo), F(hi)
    denom = fhi - flo
    with np.errstate(divide="ignore", invalid="ignore"):
        sec = np.where(denom > 0, lo - flo * (hi - lo) / denom, 0.5 * (lo + hi))
    return np.clip(sec, lo, hi)


def constraint_step(phi: ConvexSpec, psi: ConvexSpec, r, dt: float, dA, mode: str = RESOLVENT,
                    eps: float = 0.1):
    """Implicit subdifferential step ``y + dt U + dA V = r``.

    Resolvent mode applies the phi-prox with step ``dt`` and then, where
    ``dA > 0``, the psi-prox with step ``dA``.  Yosida mode replaces both
    subdifferentials by Yosida gradients with parameter ``eps`` and solves the
    resulting scalar monotone equation.  Returns ``(y, u, v)``.
    """
    if not dt > 0:
        raise BadParameter(f"dt must be > 0, got {dt}")
    r = np.asarray(r, dtype=float)
    dA = np.broadcast_to(np.asarray(dA, dtype=float), r.shape)
    if np.any(dA < 0):
        raise BadParameter("local-time increments must be >= 0")
    pos = dA > 0
    if mode == RESOLVENT:
        y1 = convex.resolvent(phi, r, dt)
        u = (r - y1) / dt
        if psi.is_trivial or not np.any(pos):
            return _squeeze(y1, u, np.zeros_like(r))
        lam = np.where(pos, dA, 1.0)
        y2 = convex.resolvent(psi, y1, lam)
        y = np.where(pos, y2, y1)
        v = np.where(pos, (y1 - y2) / lam, 0.0)
        return _squeeze(y, u, v)
    if mode != YOSIDA:
        raise BadParameter(f"unknown constraint mode {mode!r}")
    if not eps > 0:
        raise BadParameter(f"eps must be > 0, got {eps}")

    def grad(spec, y):
        return np.zeros_like(y) if spec.is_trivial else convex.yosida_gradient(spec, y, eps)

    def F(y):
        return y + dt * grad(phi, y) + dA * grad(psi, y) - r

    s = F(r)
    y = r.copy()
    active = s != 0
    if np.any(active):
        ra, sa, dAa = r[active], s[active], dA[active]

        def Fa(yy):
            return yy + dt * grad(phi, yy) + dAa * grad(psi, yy) - ra

        lo = np.minimum(ra, ra - sa)
        hi = np.maximum(ra, ra - sa)
        y[active] = _bisect_monotone(Fa, lo, hi)
    u = grad(phi, y)
    v = np.where(pos, grad(psi, y), 0.0)
    return _squeeze(y, u, v)


def _squeeze(*arrs):
    return tuple(a[()] if a.ndim == 0 else a for a in arrs)


# ------------------------------------------------------------- solution
@dataclass
class BackwardSolution:
    """Node values of the backward solve, stored time-major.

    ``Y``: ``(N+1, M)``; ``Z``: ``(N, M, d)``; ``U``, ``V``: ``(N, M)``.
    Rows before ``start_index`` are NaN when the sweep was stopped early.
    ``y_se[k]`` is the regression standard error at node ``k``.
    """

    Y: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    V: np.ndarray
    y_se: np.ndarray
    start_index: int = 0
    fallback_steps: list[int] = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.Y.shape[0] - 1

    @property
    def M(self) -> int:
        return self.Y.shape[1]

    def mean_std_err(self, k: int) -> tuple[float, float]:
        y = self.Y[k]
        return float(y.mean()), float(y.std(ddof=0) / math.sqrt(len(y))) if len(y) > 1 else 0.0


def _uses_z(f) -> bool:
    return bool(getattr(f, "params", {}).get("bz", 0.0))


def _check_inputs(fwd: ForwardBatch, bundle: PathBundle):
    if fwd.N != bundle.grid.N or fwd.M != bundle.M or fwd.X.shape[2] != bundle.d:
        raise ShapeMismatch(
            f"forward batch (N={fwd.N}, M={fwd.M}) does not match bundle (N={bundle.grid.N}, M={bundle.M})"
        )


def _sweep(fwd, bundle, coeffs, phi, psi, config, stop_index, frozen=None, store=True):
    # store=False keeps only the current row and returns (Y[stop_index], y_se, path_se)
    grid = bundle.grid
    N, M, d = grid.N, bundle.M, bundle.d
    dt = grid.dt
    t = grid.nodes
    dB = bundle.dB
    if store:
        Y = np.full((N + 1, M), np.nan)
        Z = np.full((N, M, d), np.nan)
        U = np.full((N, M), np.nan)
        V = np.full((N, M), np.nan)
    se = np.zeros(N + 1)
    fallbacks = []
    yn = coeffs.chi(fwd.X[N])
    if store:
        Y[N] = yn
    else:
        # pathwise cash flow; its sample mean equals the mean of the current row
        cash = np.array(yn, dtype=float)
    f, g, h = coeffs.f, coeffs.g, coeffs.h
    f_free = isinstance(f, (DriverZero, DriverConstant))
    h_zero = isinstance(h, NoiseZero)
    step_mode = config.step_mode
    for k in range(N - 1, stop_index - 1, -1):
        xk, xn = fwd.X[k], fwd.X[k + 1]
        lagged = yn if frozen is None else frozen[k + 1]
        S = yn.copy()
        dA = fwd.dA(k)
        if np.any(dA > 0):
            S += g(t[k], xk, yn) * dA
        if not h_zero:
            hv = h(t[k + 1], xn, lagged)
            S += hv * dB[k]
            if config.noise_scheme == "milstein":
                S += 0.5 * hv * h.dy(t[k + 1], xn, lagged) * (dB[k] ** 2 - dt)
        dW = bundle.dW(k)
        proj = _Projector(xk, config.basis_degree)
        if proj.fallback:
            fallbacks.append(k)
        if _uses_z(f):
            z0 = proj.fit(S[:, None] * dW / dt)
            R = S + f(t[k], xk, lagged, z0) * dt
        elif f_free:
            R = S + f(t[k], xk, lagged, None) * dt
        else:
            R = S + f(t[k], xk, lagged, np.zeros((M, d))) * dt
        fitted = proj.fit(np.column_stack([R, R[:, None] * dW / dt]))
        y_tilde, z = fitted[:, 0], fitted[:, 1:]
        se[k] = math.sqrt(float(np.mean((R - y_tilde) ** 2)) * proj.n_terms / M)
        if config.z_clip is not None:
            z = np.clip(z, -config.z_clip, config.z_clip)
        y, u, v = constraint_step(phi, psi, y_tilde, dt, dA, step_mode, config.eps)
        if store:
            Y[k], Z[k], U[k], V[k] = y, z, u, v
            yn = Y[k]
        else:
            y = np.broadcast_to(np.asarray(y, dtype=float), (M,))
            cash += (R - yn) + (y - y_tilde)
            yn = y.copy()
    if fallbacks:
        log.debug("regression fell back to degree 0 at %d steps", len(fallbacks))
    if not store:
        path_se = float(cash.std(ddof=1) / math.sqrt(M)) if M > 1 else 0.0
        return yn, se, path_se
    return BackwardSolution(Y, Z, U, V, se, stop_index, fallbacks)


def solve_backward(fwd: ForwardBatch, bundle: PathBundle, coeffs: CoefficientSet, phi: ConvexSpec,
                   psi: ConvexSpec, config: SolverConfig, stop_index: int = 0) -> BackwardSolution:
    """Backward sweep from the terminal row down to ``stop_index``.

    In Picard mode this delegates to :func:`picard_solve` and returns only the
    final iterate.
    """
    _check_inputs(fwd, bundle)
    if not 0 <= stop_index <= bundle.grid.N:
        raise BadParameter(f"stop_index {stop_index} outside the grid")
    if config.mode == PICARD:
        return picard_solve(fwd, bundle, coeffs, phi, psi, config, stop_index)[0]
    return _sweep(fwd, bundle, coeffs, phi, psi, config, stop_index)


def solve_backward_row(fwd, bundle: PathBundle, coeffs: CoefficientSet, phi: ConvexSpec, psi: ConvexSpec,
                       config: SolverConfig, stop_index: int = 0) -> tuple[np.ndarray, np.ndarray, float]:
    """``(Y[stop_index], y_se, path_se)`` from the same sweep as :func:`solve_backward`.

    Holds one row at a time, so memory is independent of ``N``.  ``path_se``
    is the Monte Carlo standard error of the row mean: least squares with an
    intercept preserves sample means, so that mean equals the mean of the
    pathwise cash flow (terminal value plus every per-path increment,
    regression residuals and constraint pushes included), and ``path_se`` is
    that cash flow's standard deviation over ``sqrt(M)``.  Picard mode needs
    every row of the previous iterate; it falls back to the full solve and
    reports the regression error at ``stop_index`` as ``path_se``.
    """
    _check_inputs(fwd, bundle)
    if not 0 <= stop_index <= bundle.grid.N:
        raise BadParameter(f"stop_index {stop_index} outside the grid")
    if config.mode == PICARD:
        sol = picard_solve(fwd, bundle, coeffs, phi, psi, config, stop_index)[0]
        return sol.Y[stop_index], sol.y_se, float(sol.y_se[stop_index])
    return _sweep(fwd, bundle, coeffs, phi, psi, config, stop_index, store=False)


def picard_solve(fwd: ForwardBatch, bundle: PathBundle, coeffs: CoefficientSet, phi: ConvexSpec,
                 psi: ConvexSpec, config: SolverConfig, stop_index: int = 0):
    """Picard iteration with the previous iterate frozen inside f and h.

    Starts from ``Y^0 = 0``.  ``residuals[n]`` is the largest (over nodes)
    mean-square gap between iterates ``n+1`` and ``n``; the iteration stops
    at the first residual below ``config.tol`` and ``iterations`` is its
    index.  Raises :class:`NonConvergence` after ``max_iter`` sweeps.
    """
    _check_inputs(fwd, bundle)
    prev = np.zeros((bundle.grid.N + 1, bundle.M))
    residuals: list[float] = []
    for n in range(int(config.max_iter)):
        sol = _sweep(fwd, bundle, coeffs, phi, psi, config, stop_index, frozen=prev)
        rows = slice(stop_index, None)
        gap = float(np.max(np.mean((sol.Y[rows] - prev[rows]) ** 2, axis=1)))
        residuals.append(gap)
        if gap < config.tol:
            return sol, n, np.array(residuals)
        prev = np.where(np.isnan(sol.Y), 0.0, sol.Y)
    raise NonConvergence(f"Picard iteration did not reach tol={config.tol} in {config.max_iter} sweeps",
                         residuals)
