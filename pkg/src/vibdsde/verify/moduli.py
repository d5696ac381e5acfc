"""Concave moduli of continuity and the Bihari bound.

``Lipschitz(K)`` is ``rho(u) = K u``; ``rho1`` and ``rho2`` are the
logarithmic moduli ``u log(1/u)`` and ``u log(1/u) log log(1/u)`` below
``delta``, continued affinely above ``delta`` with the slope of the log branch
at ``delta`` so the modulus is C^1 and stays concave.  An optional ``scale``
multiplies every kind.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy import integrate, optimize

from ..errors import BadParameter, QuadratureFailure

LIPSCHITZ = "lipschitz"
RHO1 = "rho1"
RHO2 = "rho2"


@dataclass(frozen=True)
class ModulusRho:
    kind: str = LIPSCHITZ
    K: float = 1.0
    delta: float = 0.1
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in (LIPSCHITZ, RHO1, RHO2):
            raise BadParameter(f"unknown modulus kind {self.kind!r}")
        if self.kind == LIPSCHITZ and not self.K > 0:
            raise BadParameter(f"Lipschitz modulus needs K > 0, got {self.K}")
        if not self.scale > 0:
            raise BadParameter(f"modulus scale must be > 0, got {self.scale}")
        if self.kind in (RHO1, RHO2):
            if not 0.0 < self.delta < 1.0:
                raise BadParameter(f"delta must lie in (0, 1), got {self.delta}")
            if self.kind == RHO1 and self.delta > math.exp(-1.0):
                raise BadParameter(f"rho1 is decreasing past 1/e; delta={self.delta} is too large")
            if self.kind == RHO2 and self.kappa < 0:
                raise BadParameter(f"rho2 is not nondecreasing for delta={self.delta}; choose a smaller delta")

    @classmethod
    def from_config(cls, cfg: dict[str, Any] | None) -> ModulusRho:
        cfg = dict(cfg or {"kind": LIPSCHITZ})
        kind = cfg.pop("kind", LIPSCHITZ)
        extra = set(cfg) - {"K", "delta", "scale"}
        if extra:
            raise BadParameter(f"unexpected modulus keys {sorted(extra)}")
        return cls(kind, **{k: float(v) for k, v in cfg.items()})

    @property
    def kappa(self) -> float:
        """Slope of the affine continuation (derivative of the log branch at delta)."""
        L = math.log(1.0 / self.delta)
        if self.kind == RHO1:
            return L - 1.0
        if self.kind == RHO2:
            return (L - 1.0) * math.log(L) - 1.0
        return self.K

    @property
    def diverges_at_zero(self) -> bool:
        return True

    def __call__(self, u):
        return rho_eval(self, u)

    def antiderivative_of_reciprocal(self, a: float, b: float) -> float:
        """Closed form of ``int_a^b du / rho(u)`` for ``0 < a <= b <= delta``."""
        if self.kind == LIPSCHITZ:
            return math.log(b / a) / (self.K * self.scale)
        la, lb = -math.log(a), -math.log(b)
        if self.kind == RHO1:
            return (math.log(la) - math.log(lb)) / self.scale
        return (math.log(math.log(la)) - math.log(math.log(lb))) / self.scale


def rho_eval(rho: ModulusRho, u):
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0) or np.any(np.isnan(u_arr)):
        raise BadParameter("modulus argument must be >= 0")
    if rho.kind == LIPSCHITZ:
        out = rho.K * u_arr
    else:
        d = rho.delta
        with np.errstate(divide="ignore", invalid="ignore"):
            safe = np.where((u_arr > 0) & (u_arr <= d), u_arr, d)
            L = -np.log(safe)
            branch = safe * L if rho.kind == RHO1 else safe * L * np.log(L)
        Ld = math.log(1.0 / d)
        at_d = d * Ld if rho.kind == RHO1 else d * Ld * math.log(Ld)
        out = np.where(u_arr <= d, np.where(u_arr > 0, branch, 0.0), at_d + rho.kappa * (u_arr - d))
    out = rho.scale * out
    return out[()] if out.ndim == 0 else out


def reciprocal_integral(rho: ModulusRho, a: float, b: float) -> float:
    """``int_a^b du / rho(u)`` by quadrature in ``s = log(1/u)`` (reaches tiny ``a``)."""
    if not 0 < a < b:
        raise BadParameter("need 0 < a < b")

    def integrand(s):
        u = math.exp(-s)
        return u / float(rho_eval(rho, u))

    val, err = integrate.quad(integrand, math.log(1.0 / b), math.log(1.0 / a), limit=400)
    if not math.isfinite(val):
        raise QuadratureFailure("reciprocal modulus integral did not converge")
    return val


def modulus_invariants(rho: ModulusRho, n: int = 2001, u_max: float = 2.0) -> dict[str, Any]:
    """Grid checks: rho(0)=0, positivity, monotonicity, midpoint concavity, divergence witness."""
    u = np.linspace(0.0, u_max, n)
    r = rho_eval(rho, u)
    mid = rho_eval(rho, 0.5 * (u[:-2] + u[2:]))
    conc = mid - 0.5 * (r[:-2] + r[2:])
    # witness: quadrature of du/rho down to 1e-300 matches the closed form, which is unbounded
    top = min(rho.delta, 0.01) if rho.kind != LIPSCHITZ else 0.5
    lows = [1e-10, 1e-40, 1e-160, 1e-300]
    vals = [reciprocal_integral(rho, a, top) for a in lows]
    exact = [rho.antiderivative_of_reciprocal(a, top) for a in lows]
    return {
        "rho_at_zero": float(r[0]),
        "positive": bool(np.all(r[1:] > 0)),
        "nondecreasing": bool(np.all(np.diff(r) >= -1e-12)),
        "concave": bool(np.all(conc >= -1e-12)),
        "integral_values": vals,
        "integral_matches_closed_form": bool(np.allclose(vals, exact, rtol=1e-6)),
        "integral_increasing": bool(np.all(np.diff(vals) > 0)),
    }


def bihari_bound(alpha: float, f: Callable[[float], float], w: Callable[[float], float], t: float,
                 x0: float = 1.0, diverges_at_zero: bool | None = None) -> float:
    """Upper bound ``G^{-1}(G(alpha) + int_0^t f)`` with ``G(x) = int_{x0}^x dy / w(y)``.

    Returns 0 when ``alpha = 0`` and ``int_{0+} du / w(u)`` diverges, and
    ``inf`` when the argument exceeds the range of ``G`` (finite-time blow-up).
    """
    if alpha < 0:
        raise BadParameter(f"alpha must be >= 0, got {alpha}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        F, _ = integrate.quad(f, 0.0, t, limit=200)
    if not math.isfinite(F) or F < 0:
        raise QuadratureFailure(f"integral of f over [0, {t}] is not a finite non-negative number")

    def G(x):
        # near a blow-up the integrand decays fast; quad may warn while still converging
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v, _ = integrate.quad(lambda y: 1.0 / w(y), x0, x, limit=400)
        return v

    if alpha == 0:
        if diverges_at_zero is None:
            diverges_at_zero = bool(getattr(w, "diverges_at_zero", False)) or _numerically_divergent(w)
        if diverges_at_zero:
            return 0.0
        G_alpha = -_tail_integral(w, x0)
    else:
        G_alpha = G(alpha)
    if not math.isfinite(G_alpha):
        raise QuadratureFailure("G(alpha) is not finite")
    target = G_alpha + F
    lo = alpha if alpha > 0 else 0.0
    hi = max(2.0 * x0, 2.0 * alpha, 1.0)
    while G(hi) < target:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    if F == 0:
        return float(alpha)
    if lo == 0.0:
        return optimize.brentq(lambda x: (-_tail_integral(w, x0, x) if x > 0 else G_alpha) - target,
                               0.0, hi, xtol=1e-14, rtol=1e-13)
    return optimize.brentq(lambda x: G(x) - target, lo, hi, xtol=1e-14, rtol=1e-13)


def _tail_integral(w, x0, a=0.0):
    # int_a^{x0} dy / w(y), endpoint singularity handled by quad
    v, _ = integrate.quad(lambda y: 1.0 / w(y), a, x0, limit=400)
    if not math.isfinite(v):
        raise QuadratureFailure("integral of 1/w near zero is not finite")
    return v


def _numerically_divergent(w) -> bool:
    # compare int_{a}^{1} dy/w for shrinking a in log variables; divergent if it keeps growing
    def part(a, b):
        v, _ = integrate.quad(lambda s: math.exp(-s) / w(math.exp(-s)), math.log(1 / b), math.log(1 / a), limit=400)
        return v

    incs = [part(10.0 ** -(2 ** (k + 1)), 10.0 ** -(2 ** k)) for k in range(1, 8)]
    return incs[-1] > 1e-3 * max(incs[0], 1e-300)
