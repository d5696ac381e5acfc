"""Seeded Brownian noise: time grid, forward increments and the backward path.

Gaussian draws come from a counter-based generator: each standard normal is a
pure function of ``(stream, seed, path, step, dim)``.  The counter is hashed
with two rounds of the MurmurHash3 64-bit finalizer, the top 53 bits become a
uniform on (0, 1), and the uniform is mapped through the inverse normal CDF
(``scipy.special.ndtri``).  This choice is part of the reproducibility
contract: any path can be regenerated alone, in any order, by any worker.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import BadParameter, ShapeMismatch

_M1 = np.uint64(0xFF51AFD7ED558CCD)
_M2 = np.uint64(0xC4CEB9FE1A85EC53)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STEP_MUL = np.uint64(0xD6E8FEB86659FD93)
_S33 = np.uint64(33)
_S11 = np.uint64(11)
_MASK64 = (1 << 64) - 1

# stream tags keep W and B draws disjoint for the same seed
STREAM_W = 0x5749
STREAM_B = 0x4242


def _fmix64(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> _S33)
    x = x * _M1
    x = x ^ (x >> _S33)
    x = x * _M2
    return x ^ (x >> _S33)


def _stream_key(seed: int, stream: int) -> np.uint64:
    base = np.array([(int(seed) & _MASK64) ^ (stream * 0x100000001B3 & _MASK64)], dtype=np.uint64)
    return _fmix64(_fmix64(base))[0]


def counter_normals(seed: int, stream: int, paths: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Standard normals indexed by ``paths[:, None]`` x ``counters[None, :]``."""
    key = _stream_key(seed, stream)
    p = np.asarray(paths, dtype=np.uint64)[:, None]
    c = np.asarray(counters, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        h = _fmix64(key + p * _GOLDEN)
        h = _fmix64(h ^ (c * _STEP_MUL + _GOLDEN))
    u = ((h >> _S11).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)
    return ndtri(u)


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    T: float
    N: int

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise BadParameter(f"step count N must be an integer >= 1, got {self.N}")
        if not (math.isfinite(self.t0) and math.isfinite(self.T)) or self.t0 < 0 or self.t0 >= self.T:
            raise BadParameter(f"time grid needs 0 <= t0 < T, got t0={self.t0}, T={self.T}")

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.N

    @property
    def nodes(self) -> np.ndarray:
        t = self.t0 + np.arange(self.N + 1) * self.dt
        t[-1] = self.T
        return t

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Grid index of the node equal to ``t``; BadParameter if ``t`` is off-grid."""
        k = int(round((t - self.t0) / self.dt))
        if k < 0 or k > self.N or abs(self.nodes[k] - t) > tol * max(1.0, abs(t)):
            raise BadParameter(f"time {t} is not a node of {self}")
        return k


def make_time_grid(t0: float, T: float, N: int) -> TimeGrid:
    return TimeGrid(float(t0), float(T), N)


@dataclass
class PathBundle:
    """Forward increments for ``M`` paths plus one backward Brownian path ``B``.

    Increments are not stored by default: :meth:`dW` regenerates a step on
    demand, which keeps memory flat for large ``M * N``.  Call
    :meth:`cache_increments` when the same bundle is swept many times.
    """

    grid: TimeGrid
    M: int
    d: int
    seed: int
    B: np.ndarray
    scenario_seed: int | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        if self.B.shape != (self.grid.N + 1,):
            raise ShapeMismatch(f"B must have N+1={self.grid.N + 1} entries, got {self.B.shape}")
        if self.B[0] != 0.0:
            raise BadParameter("backward path must start at B[0] = 0")

    @property
    def dB(self) -> np.ndarray:
        return np.diff(self.B)

    def dW(self, k: int, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Increments of step ``k`` for paths ``start:stop``, shape ``(n, d)``."""
        if not 0 <= k < self.grid.N:
            raise BadParameter(f"step index {k} outside [0, {self.grid.N})")
        stop = self.M if stop is None else stop
        cached = self._cache.get("dW")
        if cached is not None:
            return cached[k, start:stop]
        counters = k * self.d + np.arange(self.d)
        z = counter_normals(self.seed, STREAM_W, np.arange(start, stop), counters)
        return z * math.sqrt(self.grid.dt)

    def cache_increments(self) -> None:
        """Keep all increments in memory (``N * M * d`` floats) for repeated sweeps."""
        if "dW" not in self._cache:
            arr = np.empty((self.grid.N, self.M, self.d))
            for k in range(self.grid.N):
                arr[k] = self.dW(k)
            self._cache["dW"] = arr

    def drop_cache(self) -> None:
        self._cache.clear()

    def path_increments(self, m: int) -> np.ndarray:
        """All increments of a single path, shape ``(N, d)``; independent of ``M``."""
        counters = np.arange(self.grid.N * self.d)
        z = counter_normals(self.seed, STREAM_W, np.array([m]), counters)[0]
        return z.reshape(self.grid.N, self.d) * math.sqrt(self.grid.dt)

    def increments(self) -> np.ndarray:
        """Materialised ``(M, N, d)`` array; only sensible for small bundles."""
        out = np.empty((self.M, self.grid.N, self.d))
        for k in range(self.grid.N):
            out[:, k, :] = self.dW(k)
        return out


def backward_path(grid: TimeGrid, seed: int) -> np.ndarray:
    """A Brownian path on the grid nodes, ``B[0] = 0``, driven by ``seed`` alone."""
    z = counter_normals(seed, STREAM_B, np.array([0]), np.arange(grid.N))[0]
    return np.concatenate([[0.0], np.cumsum(z * math.sqrt(grid.dt))])


def bridge_path(grid: TimeGrid, seed: int, end_value: float) -> np.ndarray:
    """Brownian bridge from 0 to ``end_value`` on the grid (pinned test scenarios)."""
    b = backward_path(grid, seed)
    frac = (grid.nodes - grid.t0) / (grid.T - grid.t0)
    return b + frac * (end_value - b[-1])


def sample_noise(grid: TimeGrid, M: int, d: int, seed: int, scenario_seed: int | None = None,
                 B: np.ndarray | None = None) -> PathBundle:
    """Build a :class:`PathBundle`.

    The backward path comes from ``scenario_seed`` (defaults to ``seed``)
    unless an explicit path ``B`` is supplied.
    """
    for name, v in (("M", M), ("d", d)):
        if isinstance(v, bool) or int(v) != v or v < 1:
            raise BadParameter(f"{name} must be a positive integer, got {v}")
    sc = seed if scenario_seed is None else scenario_seed
    if B is None:
        B = backward_path(grid, sc)
    return PathBundle(grid, int(M), int(d), int(seed), B, scenario_seed=int(sc))
