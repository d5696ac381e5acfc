"""Reference solutions that share no code path with the Monte Carlo solver.

``linear_exp``       Y_t = chi * exp(a (T - t)) for ``f = a y``.
``clamped_ode``      fine-grid implicit Euler plus proximal clamp for
                     ``y' + a y + c in d phi(y)``, ``y(T) = chi``.
``doss_closed_form`` chi * exp(beta (B_T - B_t) - beta^2 (T - t) / 2), optionally
                     times exp(a (T - t)) for a linear driver.
``fd1d``             projected implicit finite differences for the 1-D
                     variational PDE on an interval with the nonlinear Neumann
                     condition, run on three nested grids.
"""
from __future__ import annotations

import math
from typing import Any

import numpy as np
from scipy.linalg import solve_banded

from .. import convex
from ..coefficients import CoefficientSet
from ..convex import ConvexSpec
from ..errors import BadParameter
from ..forward import BALL, DomainSpec

LINEAR_EXP = "LinearExp"
CLAMPED_ODE = "ClampedODE"
DOSS_CLOSED_FORM = "DossClosedForm"
FD1D = "FD1D"


def oracle_solve(kind: str, params: dict[str, Any]):
    """Dispatch on ``kind``; see the module docstring for the parameters."""
    fns = {LINEAR_EXP: linear_exp, CLAMPED_ODE: clamped_ode, DOSS_CLOSED_FORM: doss_closed_form, FD1D: fd1d}
    if kind not in fns:
        raise BadParameter(f"unknown oracle {kind!r}; known: {sorted(fns)}")
    try:
        return fns[kind](**params)
    except TypeError as exc:
        raise BadParameter(f"bad parameters for oracle {kind}: {exc}") from None


def linear_exp(a: float, chi: float, T: float, t=0.0):
    t = np.asarray(t, dtype=float)
    if np.any(t > T):
        raise BadParameter("t must not exceed T")
    out = chi * np.exp(a * (T - t))
    return float(out) if out.ndim == 0 else out


def _clamped_path(a, c, chi, phi, T, n):
    dt = T / n
    if a * dt >= 1:
        raise BadParameter(f"implicit step needs a*dt < 1, got {a * dt}")
    y = np.empty(n + 1)
    y[n] = chi
    if phi.kind in (convex.ZERO, convex.INDICATOR):
        # the prox is a clip here; plain floats keep the fine loop fast
        lo, hi = (phi.lo, phi.hi) if phi.kind == convex.INDICATOR else (-math.inf, math.inf)
        cur = float(chi)
        for k in range(n - 1, -1, -1):
            cur = min(max((cur + c * dt) / (1.0 - a * dt), lo), hi)
            y[k] = cur
    else:
        for k in range(n - 1, -1, -1):
            y[k] = convex.resolvent(phi, (y[k + 1] + c * dt) / (1.0 - a * dt), dt)
    return np.linspace(0.0, T, n + 1), y


def clamped_ode(a: float = 1.0, chi: float = 1.0, cap: float | None = 2.0, T: float = 1.0, t=0.0,
                c: float = 0.0, phi: ConvexSpec | None = None, n_fine: int = 200_000,
                with_error: bool = False):
    """Deterministic variational ODE; ``phi`` defaults to the indicator of ``(-inf, cap]``.

    With ``with_error`` also returns the step-halving change (the oracle's own
    error estimate).
    """
    if phi is None:
        phi = ConvexSpec.indicator(hi=math.inf if cap is None else cap)
    if not n_fine >= 2 or n_fine % 2:
        raise BadParameter("n_fine must be an even integer >= 2")
    tf, yf = _clamped_path(a, c, chi, phi, T, n_fine)
    tc, yc = _clamped_path(a, c, chi, phi, T, n_fine // 2)
    tq = np.asarray(t, dtype=float)
    out = np.interp(tq, tf, yf)
    out = float(out) if out.ndim == 0 else out
    if with_error:
        return out, float(np.max(np.abs(np.interp(tf, tc, yc) - yf)))
    return out


def doss_closed_form(beta: float, chi: float, T: float, dB: float, t: float = 0.0, a: float = 0.0):
    """``dB`` is ``B_T - B_t``."""
    if t > T:
        raise BadParameter("t must not exceed T")
    return float(chi * math.exp(beta * dB - 0.5 * beta**2 * (T - t) + a * (T - t)))


def _slab(dom):
    if isinstance(dom, DomainSpec):
        if dom.kind != BALL or dom.dim != 1:
            raise BadParameter("FD1D needs a 1-D ball (an interval [-R, R]) or explicit (lo, hi)")
        return -dom.radius, dom.radius
    lo, hi = map(float, dom)
    if not lo < hi:
        raise BadParameter("slab needs lo < hi")
    return lo, hi


def _fd_run(coeffs, phi, psi, lo, hi, T, nx, nt, t_idx_scale):
    h = (hi - lo) / nx
    dt = T / nt
    x = np.linspace(lo, hi, nx + 1)
    X = x[:, None]
    sig = float(coeffs.sigma(X[:1])[0, 0, 0])
    a = 0.5 * sig**2
    bx = coeffs.b(X)[:, 0]
    # implicit operator (I - dt L) in banded form
    lower = -dt * (a / h**2 - bx / (2 * h))
    upper = -dt * (a / h**2 + bx / (2 * h))
    diag = np.full(nx + 1, 1.0 + 2.0 * dt * a / h**2)
    ab = np.zeros((3, nx + 1))
    ab[1] = diag
    ab[0, 1:] = upper[:-1]
    ab[2, :-1] = lower[1:]
    # ghost-point Neumann rows: both neighbours fold into one, drift uses the known slope
    ab[0, 1] = -2.0 * dt * a / h**2
    ab[2, nx - 1] = -2.0 * dt * a / h**2
    lam_b = sig**2 * dt / h
    bd = np.array([0, nx])
    n_inward = np.array([1.0, -1.0])
    u = coeffs.chi(X).astype(float)
    out = np.empty((nt // t_idx_scale + 1, nx + 1))
    out[-1] = u
    for k in range(nt - 1, -1, -1):
        t = k * dt
        ux = np.gradient(u, h)
        z = sig * ux
        rhs = u + dt * coeffs.f(t, X, u, z[:, None])
        gb = coeffs.g(t, X[bd], u[bd])
        # inward slope equals -g; in x-coordinates slope = -g * n_inward
        slope = -gb * n_inward
        rhs[bd] += dt * (2.0 * a * gb / h + bx[bd] * slope)
        v = solve_banded((1, 1), ab, rhs)
        v = convex.resolvent(phi, v, dt)
        if not psi.is_trivial:
            v[bd] = convex.resolvent(psi, v[bd], lam_b)
        u = v
        if k % t_idx_scale == 0:
            out[k // t_idx_scale] = u
    return x, out


def fd1d(coeffs: CoefficientSet, dom, T: float, times, points, phi: ConvexSpec | None = None,
         psi: ConvexSpec | None = None, nx: int = 100, nt: int = 400, levels: int = 3) -> dict[str, Any]:
    """Projected implicit finite differences on nested grids.

    Solves ``du/dt + sigma^2/2 u_xx + b u_x + f(t, x, u, sigma u_x) in d phi(u)``
    backward from ``u(T) = chi`` with ``d_n u + g in d psi(u)`` at both ends
    (inward normal).  ``f`` and ``g`` are explicit, diffusion is implicit.
    ``times`` must be multiples of ``T / nt``.  Returns the finest-level values,
    the changes between successive levels and their ratios.
    """
    phi = ConvexSpec.zero() if phi is None else phi
    psi = ConvexSpec.zero() if psi is None else psi
    if not coeffs.h.__class__.__name__ == "NoiseZero":
        raise BadParameter("FD1D covers the deterministic case h = 0 only")
    if levels < 2:
        raise BadParameter("need at least two levels for self-convergence")
    lo, hi = _slab(dom)
    times = np.asarray(times, dtype=float)
    pts = np.asarray(points, dtype=float).reshape(-1)
    if np.any(pts < lo - 1e-12) or np.any(pts > hi + 1e-12):
        raise BadParameter("query points must lie in the slab")
    steps = times / T * nt
    if np.any(np.abs(steps - np.round(steps)) > 1e-6) or np.any(times < 0) or np.any(times > T):
        raise BadParameter(f"query times must be multiples of T/nt = {T / nt}")
    base_idx = np.round(steps).astype(int)
    vals = []
    for lev in range(levels):
        s = 2**lev
        x, out = _fd_run(coeffs, phi, psi, lo, hi, T, nx * s, nt * s, s)
        vals.append(np.array([np.interp(pts, x, out[i]) for i in base_idx]))
    changes = [float(np.max(np.abs(vals[i + 1] - vals[i]))) for i in range(levels - 1)]
    factors = [changes[i] / changes[i + 1] if changes[i + 1] > 0 else math.inf for i in range(len(changes) - 1)]
    return {"times": times, "points": pts, "u": vals[-1], "changes": changes, "factors": factors,
            "grid": {"nx": nx * 2 ** (levels - 1), "nt": nt * 2 ** (levels - 1)}}
