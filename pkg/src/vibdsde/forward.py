"""Reflected Euler scheme for the forward diffusion and its boundary local time.

The domain is ``{phi_d > 0}`` with ``|grad phi_d| = 1`` on the boundary, so a
normal projection is the exact discrete Skorokhod map and the projection
length is the local-time increment.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np

from .coefficients import CoefficientSet, DiffusionScaledIdentity, DiffusionZero, DriftZero
from .errors import BadParameter, GeometryUndefined
from .noise import PathBundle

TOL_PROJ = 1e-12

HALF_SPACE = "half_space"
BALL = "ball"
WHOLE_SPACE = "whole_space"


@dataclass(frozen=True)
class DomainSpec:
    kind: str = WHOLE_SPACE
    dim: int = 1
    radius: float = 1.0
    r_min: float = 0.05

    def __post_init__(self):
        if self.kind not in (HALF_SPACE, BALL, WHOLE_SPACE):
            raise BadParameter(f"unknown domain kind {self.kind!r}")
        if isinstance(self.dim, bool) or int(self.dim) != self.dim or self.dim < 1:
            raise BadParameter(f"domain dim must be a positive integer, got {self.dim}")
        if self.kind == BALL and not 0.0 < self.r_min < self.radius:
            raise BadParameter(f"ball needs 0 < r_min < R, got r_min={self.r_min}, R={self.radius}")

    @classmethod
    def half_space(cls, dim: int = 1) -> DomainSpec:
        return cls(HALF_SPACE, dim)

    @classmethod
    def ball(cls, radius: float = 1.0, r_min: float = 0.05, dim: int = 2) -> DomainSpec:
        return cls(BALL, dim, float(radius), float(r_min))

    @classmethod
    def whole_space(cls, dim: int = 1) -> DomainSpec:
        return cls(WHOLE_SPACE, dim)

    def to_config(self) -> dict[str, Any]:
        if self.kind == BALL:
            return {"kind": BALL, "radius": self.radius, "r_min": self.r_min, "dim": self.dim}
        return {"kind": self.kind, "dim": self.dim}

    @classmethod
    def from_config(cls, cfg: dict[str, Any]) -> DomainSpec:
        cfg = dict(cfg or {})
        kind = cfg.pop("kind", WHOLE_SPACE)
        allowed = {"dim", "radius", "r_min"} if kind == BALL else {"dim"}
        extra = set(cfg) - allowed
        if extra:
            raise BadParameter(f"unexpected domain keys for {kind}: {sorted(extra)}")
        return cls(kind, **cfg)

    def phi(self, x) -> np.ndarray:
        """Vectorised domain function over the last axis."""
        x = np.asarray(x, dtype=float)
        if self.kind == HALF_SPACE:
            return x[..., 0]
        if self.kind == BALL:
            return self.radius - np.linalg.norm(x, axis=-1)
        return np.full(x.shape[:-1], np.inf)


def _as_point(dom: DomainSpec, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dom.dim,):
        raise BadParameter(f"point must have {dom.dim} coordinates, got shape {x.shape}")
    return x


def domain_geometry(dom: DomainSpec, x) -> tuple[float, np.ndarray]:
    """``(phi_d(x), grad phi_d(x))``; the gradient is the unit inward normal.

    For a ball the gradient ``-x/|x|`` is used everywhere outside ``r_min``.
    """
    x = _as_point(dom, x)
    if dom.kind == HALF_SPACE:
        e1 = np.zeros(dom.dim)
        e1[0] = 1.0
        return float(x[0]), e1
    if dom.kind == BALL:
        r = float(np.linalg.norm(x))
        if r < dom.r_min:
            raise GeometryUndefined(f"normal undefined for |x|={r} < r_min={dom.r_min}")
        return dom.radius - r, -x / r
    return math.inf, np.zeros(dom.dim)


def _project(dom: DomainSpec, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # x: (M, d) candidates -> projected states and local-time increments
    if dom.kind == HALF_SPACE:
        out = x.copy()
        dA = np.maximum(-x[:, 0], 0.0)
        out[:, 0] = np.maximum(x[:, 0], 0.0)
        return out, dA
    if dom.kind == BALL:
        r = np.linalg.norm(x, axis=1)
        dA = np.maximum(r - dom.radius, 0.0)
        hit = dA > 0
        out = x.copy()
        if np.any(hit):
            out[hit] = x[hit] * (dom.radius / r[hit])[:, None]
        return out, dA
    return x, np.zeros(x.shape[0])


def reflect_step(dom: DomainSpec, x_candidate) -> tuple[np.ndarray, float]:
    """Project a single candidate back onto the closed domain.

    Returns the new point and the local-time increment (projection length).
    """
    x = _as_point(dom, x_candidate)
    out, dA = _project(dom, x[None, :])
    if dA[0] > 0 and dom.kind == BALL:
        domain_geometry(dom, out[0])  # raises if the normal is undefined
    return out[0], float(dA[0])


@dataclass
class ForwardBatch:
    """Trajectories of all paths stored time-major.

    ``X`` has shape ``(N+1, M, d)``, ``A`` has shape ``(N+1, M)`` and
    ``contact[k]`` flags paths whose step into node ``k`` was projected.
    """

    X: np.ndarray
    A: np.ndarray
    contact: np.ndarray
    start_index: int = 0

    @property
    def M(self) -> int:
        return self.X.shape[1]

    @property
    def N(self) -> int:
        return self.X.shape[0] - 1

    def dA(self, k: int) -> np.ndarray:
        return self.A[k + 1] - self.A[k]

    def trajectory(self, m: int) -> dict[str, np.ndarray]:
        return {"X": self.X[:, m, :], "A": self.A[:, m], "flags": self.contact[:, m]}


def _euler_increment(coeffs: CoefficientSet, x: np.ndarray, dt: float, dw: np.ndarray) -> np.ndarray:
    sig = coeffs.sigma
    if isinstance(sig, DiffusionScaledIdentity):
        noise = sig.scalar * dw
    elif isinstance(sig, DiffusionZero):
        noise = 0.0
    else:
        noise = np.einsum("mij,mj->mi", sig(x), dw)
    if isinstance(coeffs.b, DriftZero):
        return x + noise
    return x + coeffs.b(x) * dt + noise


def _validate_start(dom, x0, bundle, start_index):
    x0 = _as_point(dom, x0)
    if bundle.d != dom.dim:
        raise BadParameter(f"bundle dimension {bundle.d} does not match domain dimension {dom.dim}")
    if not 0 <= start_index <= bundle.grid.N:
        raise BadParameter(f"start_index {start_index} outside [0, {bundle.grid.N}]")
    if dom.phi(x0) < -TOL_PROJ:
        raise BadParameter(f"starting point {x0} lies outside the closed domain")
    return x0


def _chunks(M: int, threads: int) -> list[tuple[int, int]]:
    n = max(1, min(int(threads), M))
    edges = np.linspace(0, M, n + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _map_chunks(fn, chunks, threads):
    if len(chunks) == 1:
        return [fn(*chunks[0])]
    with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
        return list(ex.map(lambda c: fn(*c), chunks))


def simulate_forward(dom: DomainSpec, coeffs: CoefficientSet, x0, bundle: PathBundle,
                     start_index: int = 0, threads: int = 1) -> ForwardBatch:
    """Reflected Euler paths started from ``x0`` at node ``start_index``.

    Before ``start_index`` each path is frozen at ``x0`` with zero local time.
    Paths are split into ``threads`` contiguous blocks; the result does not
    depend on the split.
    """
    x0 = _validate_start(dom, x0, bundle, start_index)
    N, M, d = bundle.grid.N, bundle.M, dom.dim
    dt = bundle.grid.dt
    X = np.empty((N + 1, M, d))
    A = np.zeros((N + 1, M))
    contact = np.zeros((N + 1, M), dtype=bool)
    X[: start_index + 1] = x0

    def run(lo, hi):
        x = X[start_index, lo:hi].copy()
        for k in range(start_index, N):
            cand = _euler_increment(coeffs, x, dt, bundle.dW(k, lo, hi))
            x, da = _project(dom, cand)
            X[k + 1, lo:hi] = x
            A[k + 1, lo:hi] = A[k, lo:hi] + da
            contact[k + 1, lo:hi] = da > 0

    _map_chunks(run, _chunks(M, threads), threads)
    return ForwardBatch(X, A, contact, start_index)


def forward_endpoints(dom: DomainSpec, coeffs: CoefficientSet, x0, bundle: PathBundle,
                      start_index: int = 0, threads: int = 1) -> dict[str, np.ndarray]:
    """Same scheme as :func:`simulate_forward` keeping only terminal values.

    Returns ``X_T``, ``A_T`` and the per-path minimum of ``phi_d`` along the
    trajectory (containment diagnostic) without storing whole paths.
    """
    x0 = _validate_start(dom, x0, bundle, start_index)
    M = bundle.M
    dt = bundle.grid.dt
    XT = np.empty((M, dom.dim))
    AT = np.zeros(M)
    min_phi = np.full(M, float(dom.phi(x0)))

    def run(lo, hi):
        x = np.broadcast_to(x0, (hi - lo, dom.dim)).copy()
        a = np.zeros(hi - lo)
        mp = min_phi[lo:hi]
        for k in range(start_index, bundle.grid.N):
            x, da = _project(dom, _euler_increment(coeffs, x, dt, bundle.dW(k, lo, hi)))
            a += da
            if dom.kind != WHOLE_SPACE:
                np.minimum(mp, dom.phi(x), out=mp)
        XT[lo:hi] = x
        AT[lo:hi] = a

    _map_chunks(run, _chunks(M, threads), threads)
    return {"X_T": XT, "A_T": AT, "min_phi": min_phi}


class _RowView:
    def __init__(self, owner: "CheckpointedForward"):
        self._owner = owner

    @property
    def shape(self) -> tuple[int, int, int]:
        o = self._owner
        return (o.N + 1, o.M, o.d)

    def __getitem__(self, k):
        if not isinstance(k, (int, np.integer)):
            raise TypeError("checkpointed paths support single-node indexing only")
        return self._owner._row(int(k))[0]


class CheckpointedForward:
    """Forward paths held as checkpoints every ``segment`` nodes.

    Rows are rebuilt one segment at a time on demand, so a descending sweep
    costs one extra forward pass and memory grows like ``sqrt(N)`` instead
    of ``N``.  ``X[k]`` and ``dA(k)`` match :func:`simulate_forward` exactly.
    """

    def __init__(self, dom: DomainSpec, coeffs: CoefficientSet, x0, bundle: PathBundle,
                 start_index: int = 0, threads: int = 1, segment: int | None = None):
        x0 = _validate_start(dom, x0, bundle, start_index)
        self.dom, self.coeffs, self.bundle = dom, coeffs, bundle
        self.start_index = start_index
        self.threads = threads
        self.d = dom.dim
        n = bundle.grid.N - start_index
        self.segment = max(1, int(segment or math.ceil(math.sqrt(max(n, 1)))))
        self._x0 = x0
        self._ckpt: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._seg_start = None
        self._seg_X = self._seg_A = None
        self.X = _RowView(self)
        self._build_checkpoints()

    @property
    def M(self) -> int:
        return self.bundle.M

    @property
    def N(self) -> int:
        return self.bundle.grid.N

    def _advance(self, x, a, k0, k1, keep):
        # march rows k0 -> k1, optionally returning every row
        M, d = self.M, self.d
        dt = self.bundle.grid.dt
        xs = np.empty((k1 - k0 + 1, M, d)) if keep else None
        As = np.empty((k1 - k0 + 1, M)) if keep else None
        x_out, a_out = x.copy(), a.copy()

        def run(lo, hi):
            xx, aa = x_out[lo:hi], a_out[lo:hi]
            if keep:
                xs[0, lo:hi], As[0, lo:hi] = xx, aa
            for k in range(k0, k1):
                xx, da = _project(self.dom, _euler_increment(self.coeffs, xx, dt, self.bundle.dW(k, lo, hi)))
                aa = aa + da
                if keep:
                    xs[k - k0 + 1, lo:hi], As[k - k0 + 1, lo:hi] = xx, aa
            x_out[lo:hi], a_out[lo:hi] = xx, aa

        _map_chunks(run, _chunks(M, self.threads), self.threads)
        return x_out, a_out, xs, As

    def _build_checkpoints(self):
        x = np.broadcast_to(self._x0, (self.M, self.d)).copy()
        a = np.zeros(self.M)
        c = self.start_index
        self._ckpt[c] = (x, a)
        while c < self.N:
            nxt = min(c + self.segment, self.N)
            x, a, _, _ = self._advance(x, a, c, nxt, keep=False)
            self._ckpt[nxt] = (x, a)
            c = nxt

    def _segment_for(self, k: int) -> int:
        # segment c holds rows c..c+segment; pick the one with c < k <= c+segment
        c = self.start_index + (k - self.start_index - 1) // self.segment * self.segment
        if self._seg_start != c:
            x, a = self._ckpt[c]
            end = min(c + self.segment, self.N)
            _, _, self._seg_X, self._seg_A = self._advance(x, a, c, end, keep=True)
            self._seg_start = c
        return c

    def _row(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        if not 0 <= k <= self.N:
            raise IndexError(k)
        if k <= self.start_index:
            return np.broadcast_to(self._x0, (self.M, self.d)), np.zeros(self.M)
        if self._seg_start is not None and self._seg_start <= k <= self._seg_start + self.segment:
            c = self._seg_start
        else:
            c = self._segment_for(k)
        return self._seg_X[k - c], self._seg_A[k - c]

    def dA(self, k: int) -> np.ndarray:
        if k < self.start_index:
            return np.zeros(self.M)
        c = self._seg_start
        if c is None or not (c <= k and k + 1 <= c + self.segment):
            c = self._segment_for(k + 1)
        return self._seg_A[k + 1 - c] - self._seg_A[k - c]
