"""Pathwise flow of the backward-noise coefficient and the transformed drivers.

``eta(t, x, y)`` solves ``eta = y + int_t^T h(s, x, eta) o dB_s`` (Stratonovich,
integrated from ``T`` down to ``t``).  Composing the random field with the
inverse flow removes the stochastic integral and leaves a PDE whose drivers
are ``f_tilde`` and ``g_tilde`` below.

Supported noise drivers: x-free ones (``zero``, ``exp_beta``, ``sine``) and
``separable`` ``c(x) m(y)`` with affine ``c``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .coefficients import CoefficientSet, NoiseDriver, NoiseExpBeta, NoiseSeparable, NoiseZero
from .errors import BadParameter, OutOfRange
from .forward import DomainSpec, domain_geometry

_FD_STEP = 1e-4


@dataclass(frozen=True)
class FlowSpec:
    h: NoiseDriver
    closed_form: bool | None = None

    def __post_init__(self):
        if self.closed_form is None:
            object.__setattr__(self, "closed_form", self.exp_rate is not None)
        elif self.closed_form and self.exp_rate is None:
            raise BadParameter(f"closed form flow requires a linear-in-y, x-free h, got {self.h!r}")

    @property
    def exp_rate(self) -> float | None:
        """``beta`` when ``h = beta * y`` with no x-dependence, else None."""
        h = self.h
        if isinstance(h, NoiseExpBeta):
            return h.params["beta"]
        if isinstance(h, NoiseSeparable) and h.params["m"] == "linear" and h.params["c1"] == 0.0:
            return h.params["c0"] * h.params["beta"]
        if isinstance(h, NoiseZero):
            return 0.0
        return None


def _node(path, t: float) -> int:
    return path.grid.index_of(t)


def _flow(spec: FlowSpec, k0: int, x: np.ndarray, y: np.ndarray, path, want_dx: bool):
    """Explicit-midpoint integration of the flow and its tangents from node N to k0."""
    grid = path.grid
    tn = grid.nodes
    dB = np.diff(path.B)
    h = spec.h
    X = np.broadcast_to(x, y.shape + x.shape)
    eta = y.astype(float).copy()
    jy = np.ones_like(eta)
    jx = np.zeros(y.shape + x.shape) if want_dx else None
    for k in range(grid.N - 1, k0 - 1, -1):
        db = dB[k]
        ts = 0.5 * (tn[k] + tn[k + 1])
        h0 = h(ts, X, eta)
        hy0 = h.dy(ts, X, eta)
        pred = eta + h0 * db
        mid = 0.5 * (eta + pred)
        hm = h(ts, X, mid)
        hym = h.dy(ts, X, mid)
        jy_pred = jy * (1.0 + hy0 * db)
        if want_dx:
            hx0 = h.dx(ts, X, eta)
            jx_pred = jx + (hx0 + hy0[..., None] * jx) * db
            hxm = h.dx(ts, X, mid)
            jx = jx + (hxm + hym[..., None] * 0.5 * (jx + jx_pred)) * db
        jy = jy + hym * 0.5 * (jy + jy_pred) * db
        eta = eta + hm * db
    return eta, jy, jx


def eta_flow(spec: FlowSpec, t: float, x, y, path):
    """``(eta(t, x, y), D_y eta(t, x, y))`` for the scenario ``path``.

    ``path`` is anything with ``grid`` and ``B`` attributes (a PathBundle
    works); ``t`` must be a grid node.  ``y`` may be an array.
    """
    k0 = _node(path, t)
    y_arr = np.asarray(y, dtype=float)
    if spec.closed_form:
        g = math.exp(spec.exp_rate * (path.B[-1] - path.B[k0]))
        eta, jy = y_arr * g, np.full_like(y_arr, g)
    else:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        eta, jy, _ = _flow(spec, k0, x, y_arr, path, want_dx=False)
    if eta.ndim == 0:
        return float(eta), float(jy)
    return eta, jy


def eta_flow_dx(spec: FlowSpec, t: float, x, y: float, path) -> np.ndarray:
    """``D_x eta(t, x, y)``; identically zero for x-free drivers."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if spec.h.x_free:
        return np.zeros_like(x)
    _, _, jx = _flow(spec, _node(path, t), x, np.asarray(float(y)), path, want_dx=True)
    return jx


def eta_inverse(spec: FlowSpec, t: float, x, w: float, path, max_expand: int = 60) -> float:
    """The ``y`` with ``eta(t, x, y) = w`` (absolute tolerance 1e-10 or better)."""
    k0 = _node(path, t)
    if spec.closed_form:
        return float(w) * math.exp(-spec.exp_rate * (path.B[-1] - path.B[k0]))

    def F(y):
        return eta_flow(spec, t, x, y, path)[0] - w

    lo, hi = float(w) - 1.0, float(w) + 1.0
    flo, fhi = F(lo), F(hi)
    width = 1.0
    n = 0
    while flo > 0 or fhi < 0:
        n += 1
        if n > max_expand:
            raise OutOfRange(f"w={w} is not in the range of the flow over the search bracket")
        width *= 2.0
        if flo > 0:
            lo = w - width
            flo = F(lo)
        if fhi < 0:
            hi = w + width
            fhi = F(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    return brentq(F, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=500)


def _generator_on_eta(spec, coeffs, t, x, y, path):
    # L_x eta = 1/2 tr(sigma sigma^T D_xx eta) + <b, D_x eta>, D_xx by central differences
    d = x.shape[0]
    jx = eta_flow_dx(spec, t, x, y, path)
    hess = np.zeros((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = _FD_STEP
        hess[i] = (eta_flow_dx(spec, t, x + e, y, path) - eta_flow_dx(spec, t, x - e, y, path)) / (2 * _FD_STEP)
    sig = coeffs.sigma(x[None, :])[0]
    drift = coeffs.b(x[None, :])[0]
    return 0.5 * float(np.trace(sig @ sig.T @ hess)) + float(drift @ jx), jx


def transform_coefficients(spec: FlowSpec, coeffs: CoefficientSet, dom: DomainSpec, t: float, x, y: float,
                           path) -> tuple[float, float]:
    """Drivers ``(f_tilde, g_tilde)`` of the transformed equation at ``(t, x, y)``.

    ``f_tilde = [f(eta) - 1/2 (h dh/du)(eta) + L_x eta] / D_y eta`` and
    ``g_tilde = [g(eta) - <grad phi_d(x), D_x eta>] / D_y eta`` with
    ``eta = eta(t, x, y)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eta, jy = eta_flow(spec, t, x, float(y), path)
    X = x[None, :]
    E = np.array([eta])
    h = spec.h
    ito_corr = float(h(t, X, E)[0] * h.dy(t, X, E)[0])
    f_val = float(coeffs.f(t, X, E, np.zeros_like(X))[0])
    g_val = float(coeffs.g(t, X, E)[0])
    if h.x_free:
        gen, normal_term = 0.0, 0.0
    else:
        gen, jx = _generator_on_eta(spec, coeffs, t, x, float(y), path)
        _, normal = domain_geometry(dom, x)
        normal_term = float(normal @ jx)
    f_tilde = (f_val - 0.5 * ito_corr + gen) / jy
    g_tilde = (g_val - normal_term) / jy
    return f_tilde, g_tilde


def is_monotone_on(spec: FlowSpec, t: float, x, ys, path) -> bool:
    """Diffeomorphism check: ``eta`` strictly increasing along the sorted grid ``ys``."""
    vals, jac = eta_flow(spec, t, x, np.sort(np.asarray(ys, dtype=float)), path)
    return bool(np.all(np.diff(vals) > 0) and np.all(jac > 0))
