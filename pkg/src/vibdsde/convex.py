"""Scalar convex analysis for the constraint functions.

Every supported function is proper, convex, lower semi-continuous, vanishes
at the origin and is non-negative.  Resolvents are closed form for each kind
(clamp, shrink, soft-threshold, identity), which keeps the Moreau envelope and
the Yosida gradient exact up to rounding.

All numeric functions accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import BadParameter, DomainViolation

ZERO = "zero"
INDICATOR = "indicator_interval"
QUADRATIC = "quadratic"
ABS = "abs_value"
KINDS = (ZERO, INDICATOR, QUADRATIC, ABS)


@dataclass(frozen=True)
class ConvexSpec:
    """A convex function ``theta`` on the real line.

    Use the named constructors (:meth:`zero`, :meth:`indicator`,
    :meth:`quadratic`, :meth:`abs_value`) rather than the raw fields.
    """

    kind: str = ZERO
    lo: float = -math.inf
    hi: float = math.inf
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadParameter(f"unknown convex kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == INDICATOR:
            if not self.lo <= self.hi:
                raise BadParameter(f"indicator interval needs lo <= hi, got [{self.lo}, {self.hi}]")
            if not self.lo <= 0.0 <= self.hi:
                raise BadParameter(
                    f"indicator interval [{self.lo}, {self.hi}] must contain 0 (theta(0)=0 normalization)"
                )
        if self.kind in (QUADRATIC, ABS) and not (self.c >= 0.0 and math.isfinite(self.c)):
            raise BadParameter(f"{self.kind} coefficient must be finite and >= 0, got {self.c}")

    @classmethod
    def zero(cls) -> ConvexSpec:
        return cls(ZERO)

    @classmethod
    def indicator(cls, lo: float = -math.inf, hi: float = math.inf) -> ConvexSpec:
        return cls(INDICATOR, lo=float(lo), hi=float(hi))

    @classmethod
    def quadratic(cls, c: float) -> ConvexSpec:
        return cls(QUADRATIC, c=float(c))

    @classmethod
    def abs_value(cls, scale: float) -> ConvexSpec:
        return cls(ABS, c=float(scale))

    @property
    def is_trivial(self) -> bool:
        """True when theta is identically zero on the whole line."""
        if self.kind == ZERO:
            return True
        if self.kind == INDICATOR:
            return self.lo == -math.inf and self.hi == math.inf
        return self.c == 0.0

    def domain(self) -> tuple[float, float]:
        if self.kind == INDICATOR:
            return self.lo, self.hi
        return -math.inf, math.inf

    def to_config(self) -> dict[str, Any]:
        if self.kind == ZERO:
            return {"kind": ZERO}
        if self.kind == INDICATOR:
            return {"kind": INDICATOR, "lo": _enc(self.lo), "hi": _enc(self.hi)}
        if self.kind == QUADRATIC:
            return {"kind": QUADRATIC, "c": self.c}
        return {"kind": ABS, "scale": self.c}

    @classmethod
    def from_config(cls, cfg: dict[str, Any] | None) -> ConvexSpec:
        """Parse ``{"kind": "indicator_interval", "lo": 0.0, "hi": "inf"}`` and friends."""
        if cfg is None:
            return cls.zero()
        if not isinstance(cfg, dict) or "kind" not in cfg:
            raise BadParameter(f"convex spec must be an object with a 'kind' key, got {cfg!r}")
        kind = cfg["kind"]
        allowed = {ZERO: set(), INDICATOR: {"lo", "hi"}, QUADRATIC: {"c"}, ABS: {"scale"}}
        if kind not in allowed:
            raise BadParameter(f"unknown convex kind {kind!r}; expected one of {KINDS}")
        extra = set(cfg) - allowed[kind] - {"kind"}
        if extra:
            raise BadParameter(f"unexpected keys for {kind}: {sorted(extra)}")
        if kind == ZERO:
            return cls.zero()
        if kind == INDICATOR:
            return cls.indicator(_dec(cfg.get("lo", "-inf")), _dec(cfg.get("hi", "inf")))
        if kind == QUADRATIC:
            return cls.quadratic(_dec(cfg.get("c", 1.0)))
        return cls.abs_value(_dec(cfg.get("scale", 1.0)))


@dataclass(frozen=True)
class SubdiffInterval:
    """The subdifferential ``[left, right]`` of a scalar convex function."""

    left: float
    right: float

    def contains(self, v: float, tol: float = 0.0) -> bool:
        return self.left - tol <= v <= self.right + tol


def _enc(v: float) -> float | str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return v


def _dec(v: Any) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return math.inf
        if s in ("-inf", "-infinity"):
            return -math.inf
        raise BadParameter(f"cannot parse {v!r} as an extended real")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise BadParameter(f"expected a number, got {v!r}")
    return float(v)


def _check_lam(lam) -> None:
    if np.any(np.asarray(lam) <= 0) or np.any(np.isnan(lam)):
        raise BadParameter(f"resolvent parameter must be > 0, got {lam}")


def eval_convex(spec: ConvexSpec, y):
    """theta(y); ``+inf`` outside the effective domain."""
    y = np.asarray(y, dtype=float)
    if spec.kind == ZERO:
        out = np.zeros_like(y)
    elif spec.kind == INDICATOR:
        out = np.where((y >= spec.lo) & (y <= spec.hi), 0.0, np.inf)
    elif spec.kind == QUADRATIC:
        out = 0.5 * spec.c * y * y
    else:
        out = spec.c * np.abs(y)
    return out[()] if out.ndim == 0 else out


def in_domain(spec: ConvexSpec, y):
    y = np.asarray(y, dtype=float)
    if spec.kind == INDICATOR:
        out = (y >= spec.lo) & (y <= spec.hi)
    else:
        out = np.isfinite(y)
    return out[()] if out.ndim == 0 else out


def subdiff_bounds(spec: ConvexSpec, y):
    """Vectorised left and right derivatives; NaN where ``y`` is outside the domain."""
    y = np.asarray(y, dtype=float)
    if spec.kind == ZERO:
        left = np.zeros_like(y)
        right = np.zeros_like(y)
    elif spec.kind == INDICATOR:
        left = np.where(y == spec.lo, -np.inf, 0.0)
        right = np.where(y == spec.hi, np.inf, 0.0)
        outside = (y < spec.lo) | (y > spec.hi)
        left = np.where(outside, np.nan, left)
        right = np.where(outside, np.nan, right)
    elif spec.kind == QUADRATIC:
        left = spec.c * y
        right = spec.c * y
    else:
        s = spec.c
        left = np.where(y > 0, s, -s)
        right = np.where(y < 0, -s, s)
    return left, right


def subdiff_interval(spec: ConvexSpec, y: float) -> SubdiffInterval:
    """``[theta'_l(y), theta'_r(y)]`` at a point of the domain.

    Raises
    ------
    DomainViolation
        If ``y`` lies outside ``Dom(theta)``.
    """
    y = float(y)
    if not in_domain(spec, y):
        raise DomainViolation(f"y={y} is outside Dom(theta) for {spec}")
    left, right = subdiff_bounds(spec, y)
    return SubdiffInterval(float(left), float(right))


def resolvent(spec: ConvexSpec, x, lam):
    """J_lam(x) = argmin_y |x - y|^2 / (2 lam) + theta(y)."""
    _check_lam(lam)
    x = np.asarray(x, dtype=float)
    if spec.kind == ZERO:
        out = x.copy()
    elif spec.kind == INDICATOR:
        out = np.clip(x, spec.lo, spec.hi)
    elif spec.kind == QUADRATIC:
        out = x / (1.0 + lam * spec.c)
    else:
        out = np.sign(x) * np.maximum(np.abs(x) - lam * spec.c, 0.0)
    return out[()] if out.ndim == 0 else out


def moreau_envelope(spec: ConvexSpec, x, lam):
    """theta_lam(x) = |x - J(x)|^2 / (2 lam) + theta(J(x)); finite everywhere."""
    j = resolvent(spec, x, lam)
    return (np.asarray(x, dtype=float) - j) ** 2 / (2.0 * lam) + eval_convex(spec, j)


def yosida_gradient(spec: ConvexSpec, x, lam):
    """Gradient of the Moreau envelope, (x - J_lam(x)) / lam."""
    j = resolvent(spec, x, lam)
    return (np.asarray(x, dtype=float) - j) / lam
