"""Named parametric coefficient families for the forward-backward system.

Every callable is vectorised over paths: ``x`` has shape ``(M, d)``, ``y`` has
shape ``(M,)``, ``z`` has shape ``(M, d)``; ``t`` is a scalar.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import BadParameter


class Coefficient:
    """Base for registry entries; subclasses set ``name`` and keep ``params``."""

    name = "?"
    role = "?"

    def __init__(self, **params):
        self.params = params

    def to_config(self) -> dict[str, Any]:
        return {"name": self.name, **self.params}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        return self.params.keys() == other.params.keys() and all(
            np.array_equal(self.params[k], other.params[k]) for k in self.params)

    __hash__ = None


# ---------------------------------------------------------------- drivers f
class DriverZero(Coefficient):
    name, role = "zero", "f"

    def __call__(self, t, x, y, z):
        return np.zeros_like(y, dtype=float)


class DriverConstant(Coefficient):
    name, role = "constant", "f"

    def __init__(self, c: float = 0.0):
        super().__init__(c=float(c))

    def __call__(self, t, x, y, z):
        return np.full_like(y, self.params["c"], dtype=float)


class DriverLinear(Coefficient):
    """f = a*y + c + bz * sum(z) + kx * x_1."""

    name, role = "linear", "f"

    def __init__(self, a: float = 0.0, c: float = 0.0, bz: float = 0.0, kx: float = 0.0):
        super().__init__(a=float(a), c=float(c), bz=float(bz), kx=float(kx))

    def __call__(self, t, x, y, z):
        p = self.params
        out = p["a"] * y + p["c"]
        if p["bz"]:
            out = out + p["bz"] * z.sum(axis=1)
        if p["kx"]:
            out = out + p["kx"] * x[:, 0]
        return out


def _log_damped_profile(u, delta):
    # u*sqrt(log(1/u)) on (0, delta], C^1 affine continuation above delta
    u = np.asarray(u, dtype=float)
    L = math.log(1.0 / delta)
    val_d = delta * math.sqrt(L)
    slope_d = math.sqrt(L) - 0.5 / math.sqrt(L)
    with np.errstate(divide="ignore", invalid="ignore"):
        small = u * np.sqrt(np.log(1.0 / np.where(u > 0, u, 1.0)))
    return np.where(u <= delta, np.where(u > 0, small, 0.0), val_d + slope_d * (u - delta))


class DriverLogDamped(Coefficient):
    """f = scale * sign(y) * |y| sqrt(log 1/|y|) near 0: non-Lipschitz, rho_1-type modulus."""

    name, role = "log_damped", "f"

    def __init__(self, scale: float = 1.0, delta: float = 0.1):
        if not 0.0 < delta < math.exp(-0.5):
            raise BadParameter(f"log_damped delta must lie in (0, e^-1/2), got {delta}")
        super().__init__(scale=float(scale), delta=float(delta))

    def __call__(self, t, x, y, z):
        return self.params["scale"] * np.sign(y) * _log_damped_profile(np.abs(y), self.params["delta"])


class DriverTable(Coefficient):
    """Piecewise-linear table in y (values held constant beyond the ends)."""

    name, role = "table", "f"

    def __init__(self, ys, values):
        ys = [float(v) for v in ys]
        values = [float(v) for v in values]
        if len(ys) != len(values) or len(ys) < 2 or any(b <= a for a, b in zip(ys, ys[1:])):
            raise BadParameter("table needs >= 2 strictly increasing ys with matching values")
        super().__init__(ys=ys, values=values)

    def __call__(self, t, x, y, z):
        return np.interp(y, self.params["ys"], self.params["values"])


# ------------------------------------------------------- boundary drivers g
class BoundaryZero(Coefficient):
    name, role = "zero", "g"

    def __call__(self, t, x, y):
        return np.zeros_like(y, dtype=float)


class BoundaryConstant(Coefficient):
    name, role = "constant", "g"

    def __init__(self, c: float = 0.0):
        super().__init__(c=float(c))

    def __call__(self, t, x, y):
        return np.full_like(y, self.params["c"], dtype=float)


class BoundaryLinear(Coefficient):
    """g = a*y + c; one-sided constant beta = a."""

    name, role = "linear", "g"

    def __init__(self, a: float = 0.0, c: float = 0.0):
        super().__init__(a=float(a), c=float(c))

    def __call__(self, t, x, y):
        return self.params["a"] * y + self.params["c"]


# -------------------------------------------- backward-noise drivers h (z-free)
class NoiseDriver(Coefficient):
    """h(t, x, y) with derivatives in y and x (x-gradient returned as (M, d))."""

    role = "h"
    x_free = True

    def dy(self, t, x, y):
        raise NotImplementedError

    def dx(self, t, x, y):
        return np.zeros_like(np.asarray(x, dtype=float))


class NoiseZero(NoiseDriver):
    name = "zero"

    def __call__(self, t, x, y):
        return np.zeros_like(np.asarray(y, dtype=float))

    def dy(self, t, x, y):
        return np.zeros_like(np.asarray(y, dtype=float))


class NoiseExpBeta(NoiseDriver):
    """h = beta * y; the flow is y exp(beta (B_T - B_t))."""

    name = "exp_beta"

    def __init__(self, beta: float = 0.5):
        super().__init__(beta=float(beta))

    def __call__(self, t, x, y):
        return self.params["beta"] * np.asarray(y, dtype=float)

    def dy(self, t, x, y):
        return np.full_like(np.asarray(y, dtype=float), self.params["beta"])


class NoiseSine(NoiseDriver):
    name = "sine"

    def __init__(self, amp: float = 0.1):
        super().__init__(amp=float(amp))

    def __call__(self, t, x, y):
        return self.params["amp"] * np.sin(y)

    def dy(self, t, x, y):
        return self.params["amp"] * np.cos(y)


class NoiseSeparable(NoiseDriver):
    """h = (c0 + c1 * x_1) * m(y) with m(y) = beta*y ('linear') or sin(y) ('sine')."""

    name = "separable"
    x_free = False

    def __init__(self, c0: float = 1.0, c1: float = 0.0, m: str = "linear", beta: float = 1.0):
        if m not in ("linear", "sine"):
            raise BadParameter(f"separable h: m must be 'linear' or 'sine', got {m!r}")
        super().__init__(c0=float(c0), c1=float(c1), m=m, beta=float(beta))
        self.x_free = self.params["c1"] == 0.0

    def _c(self, x):
        x = np.asarray(x, dtype=float)
        return self.params["c0"] + self.params["c1"] * x[..., 0]

    def _m(self, y):
        b = self.params["beta"]
        return b * y if self.params["m"] == "linear" else b * np.sin(y)

    def _dm(self, y):
        b = self.params["beta"]
        y = np.asarray(y, dtype=float)
        return np.full_like(y, b) if self.params["m"] == "linear" else b * np.cos(y)

    def __call__(self, t, x, y):
        return self._c(x) * self._m(np.asarray(y, dtype=float))

    def dy(self, t, x, y):
        return self._c(x) * self._dm(y)

    def dx(self, t, x, y):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = self.params["c1"] * self._m(np.asarray(y, dtype=float))
        return out

    def c_value(self, x):
        return self._c(x)

    def c_grad(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = self.params["c1"]
        return out

    def m_value(self, y):
        return self._m(np.asarray(y, dtype=float))

    def m_dy(self, y):
        return self._dm(y)


# ------------------------------------------------------------ terminal chi
class TerminalConstant(Coefficient):
    name, role = "constant", "chi"

    def __init__(self, c: float = 1.0):
        super().__init__(c=float(c))

    def __call__(self, x):
        return np.full(np.asarray(x).shape[0], self.params["c"])


class TerminalLinear(Coefficient):
    name, role = "linear", "chi"

    def __init__(self, a: float = 1.0, c: float = 0.0):
        super().__init__(a=float(a), c=float(c))

    def __call__(self, x):
        return self.params["a"] * np.asarray(x, dtype=float)[:, 0] + self.params["c"]


class TerminalAbs(Coefficient):
    """chi(x) = |x|."""

    name, role = "abs", "chi"

    def __call__(self, x):
        return np.linalg.norm(np.asarray(x, dtype=float), axis=1)


class TerminalQuadratic(Coefficient):
    name, role = "quadratic", "chi"

    def __init__(self, a: float = 1.0, c: float = 0.0):
        super().__init__(a=float(a), c=float(c))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.params["a"] * np.sum(x * x, axis=1) + self.params["c"]


class TerminalCosine(Coefficient):
    """chi(x) = c + a cos(k x_1)."""

    name, role = "cosine", "chi"

    def __init__(self, a: float = 1.0, k: float = 1.0, c: float = 0.0):
        super().__init__(a=float(a), k=float(k), c=float(c))

    def __call__(self, x):
        p = self.params
        return p["c"] + p["a"] * np.cos(p["k"] * np.asarray(x, dtype=float)[:, 0])


class TerminalMin(Coefficient):
    """chi(x) = min(a x_1 + c, cap)."""

    name, role = "min_linear", "chi"

    def __init__(self, a: float = 1.0, c: float = 0.0, cap: float = 1.0):
        super().__init__(a=float(a), c=float(c), cap=float(cap))

    def __call__(self, x):
        p = self.params
        return np.minimum(p["a"] * np.asarray(x, dtype=float)[:, 0] + p["c"], p["cap"])


class TerminalTable(Coefficient):
    name, role = "table", "chi"

    def __init__(self, xs, values):
        xs = [float(v) for v in xs]
        values = [float(v) for v in values]
        if len(xs) != len(values) or len(xs) < 2 or any(b <= a for a, b in zip(xs, xs[1:])):
            raise BadParameter("table needs >= 2 strictly increasing xs with matching values")
        super().__init__(xs=xs, values=values)

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float)[:, 0], self.params["xs"], self.params["values"])


# ---------------------------------------------------------- drift / diffusion
class DriftZero(Coefficient):
    name, role = "zero", "b"

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


class DriftConstant(Coefficient):
    name, role = "constant", "b"

    def __init__(self, v=0.0):
        super().__init__(v=v if isinstance(v, (int, float)) else [float(c) for c in v])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.params["v"], dtype=float), x.shape).copy()


class DriftLinear(Coefficient):
    """b(x) = a * x (mean reversion for a < 0)."""

    name, role = "linear", "b"

    def __init__(self, a: float = 0.0):
        super().__init__(a=float(a))

    def __call__(self, x):
        return self.params["a"] * np.asarray(x, dtype=float)


class DiffusionZero(Coefficient):
    name, role = "zero", "sigma"
    scalar = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (x.shape[-1],))


class DiffusionScaledIdentity(Coefficient):
    """sigma(x) = s * I."""

    name, role = "scaled_identity", "sigma"

    def __init__(self, s: float = 1.0):
        super().__init__(s=float(s))
        self.scalar = self.params["s"]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        return np.broadcast_to(self.scalar * np.eye(d), x.shape + (d,)).copy()


REGISTRY: dict[str, dict[str, Callable[..., Coefficient]]] = {
    "f": {c.name: c for c in (DriverZero, DriverConstant, DriverLinear, DriverLogDamped, DriverTable)},
    "g": {c.name: c for c in (BoundaryZero, BoundaryConstant, BoundaryLinear)},
    "h": {c.name: c for c in (NoiseZero, NoiseExpBeta, NoiseSine, NoiseSeparable)},
    "chi": {c.name: c for c in (TerminalConstant, TerminalLinear, TerminalAbs, TerminalQuadratic,
                                TerminalCosine, TerminalMin, TerminalTable)},
    "b": {c.name: c for c in (DriftZero, DriftConstant, DriftLinear)},
    "sigma": {c.name: c for c in (DiffusionZero, DiffusionScaledIdentity)},
}

_DEFAULTS = {"f": "zero", "g": "zero", "h": "zero", "chi": "constant", "b": "zero", "sigma": "scaled_identity"}


def make_coefficient(role: str, cfg: dict[str, Any] | str | None) -> Coefficient:
    """Instantiate a registry entry from ``{"name": ..., **params}`` (or a bare name)."""
    if role not in REGISTRY:
        raise BadParameter(f"unknown coefficient role {role!r}")
    if cfg is None:
        cfg = {"name": _DEFAULTS[role]}
    if isinstance(cfg, str):
        cfg = {"name": cfg}
    if not isinstance(cfg, dict) or "name" not in cfg:
        raise BadParameter(f"coefficient {role!r} must be an object with a 'name' key, got {cfg!r}")
    params = {k: v for k, v in cfg.items() if k != "name"}
    try:
        factory = REGISTRY[role][cfg["name"]]
    except KeyError:
        raise BadParameter(
            f"unknown {role} registry name {cfg['name']!r}; known: {sorted(REGISTRY[role])}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise BadParameter(f"bad parameters for {role}={cfg['name']!r}: {exc}") from None


@dataclass
class CoefficientSet:
    """All equation coefficients plus their growth/modulus metadata."""

    f: Coefficient = field(default_factory=DriverZero)
    g: Coefficient = field(default_factory=BoundaryZero)
    h: NoiseDriver = field(default_factory=NoiseZero)
    chi: Coefficient = field(default_factory=TerminalConstant)
    b: Coefficient = field(default_factory=DriftZero)
    sigma: Coefficient = field(default_factory=DiffusionScaledIdentity)
    K: float = 1.0
    K_prime: float = 1.0
    alpha: float = 0.5
    beta: float = 0.0
    p: float = 1.0
    modulus: dict[str, Any] = field(default_factory=lambda: {"kind": "lipschitz", "K": 1.0})

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise BadParameter(f"alpha must lie in (0, 1), got {self.alpha}")

    @classmethod
    def from_config(cls, cfg: dict[str, Any]) -> CoefficientSet:
        cfg = dict(cfg or {})
        meta = {k: cfg.pop(k) for k in ("K", "K_prime", "alpha", "beta", "p", "modulus") if k in cfg}
        unknown = set(cfg) - set(REGISTRY)
        if unknown:
            raise BadParameter(f"unknown coefficient keys {sorted(unknown)}")
        parts = {role: make_coefficient(role, cfg.get(role)) for role in REGISTRY}
        return cls(**parts, **meta)

    def to_config(self) -> dict[str, Any]:
        out = {role: getattr(self, role).to_config() for role in REGISTRY}
        out.update(K=self.K, K_prime=self.K_prime, alpha=self.alpha, beta=self.beta, p=self.p,
                   modulus=dict(self.modulus))
        return out

    def with_(self, **changes) -> CoefficientSet:
        from dataclasses import replace
        return replace(self, **changes)
