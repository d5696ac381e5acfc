"""Executable checks: envelope/resolvent properties, comparison, Yosida rate, coefficient moduli.

Every check returns a JSON-ready report ``{name, pass, metrics, config_hash, seed}``.
"""
from __future__ import annotations

import math
from typing import Any, Sequence

import numpy as np

from .. import convex
from ..backward import RESOLVENT, YOSIDA, SolverConfig, solve_backward
from ..convex import ConvexSpec
from ..errors import BadParameter, HypothesisViolation
from ..problem import Problem, config_hash, run_forward
from .moduli import ModulusRho, rho_eval

COMPARISON_THRESHOLD = 0.005
RATE_BAND = (0.7, 1.3)


def report(name: str, passed: bool, metrics: dict[str, Any], cfg: dict[str, Any] | None = None,
           seed: int | None = None) -> dict[str, Any]:
    return {"name": name, "pass": bool(passed), "metrics": _jsonable(metrics),
            "config_hash": config_hash(cfg or {}), "seed": seed}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


# ------------------------------------------------------------ envelope suite
def _random_spec(rng: np.random.Generator, kind: str) -> ConvexSpec:
    if kind == "zero":
        return ConvexSpec.zero()
    if kind == "indicator_interval":
        lo = -math.inf if rng.random() < 0.25 else -rng.uniform(0.0, 3.0)
        hi = math.inf if rng.random() < 0.25 else rng.uniform(0.0, 3.0)
        return ConvexSpec.indicator(lo, hi)
    if kind == "quadratic":
        return ConvexSpec.quadratic(rng.uniform(0.05, 5.0))
    return ConvexSpec.abs_value(rng.uniform(0.05, 3.0))


def moreau_yosida_suite(n_draws: int = 10_000, seed: int = 0, specs_per_kind: int = 25) -> dict[str, Any]:
    """Resolvent/envelope properties on random ``(x, y, eps, delta)`` draws.

    (i)   envelope identity ``theta_eps = eps/2 |grad|^2 + theta(J_eps)``,
          ``theta_eps <= theta`` and midpoint convexity;
    (ii)  ``grad theta_eps(x)`` lies in ``d theta(J_eps x)``;
    (iii) ``grad theta_eps`` is ``1/eps``-Lipschitz;
    (iv)  ``grad theta_eps`` is monotone;
    (v)   ``(grad_eps(x) - grad_delta(y))(x - y) >= -(eps + delta) grad_eps(x) grad_delta(y)``.
    """
    rng = np.random.default_rng(seed)
    kinds = ["zero", "indicator_interval", "quadratic", "abs_value"]
    n_specs = len(kinds) * specs_per_kind
    per = max(1, n_draws // n_specs)
    viol = {p: 0 for p in ("i", "ii", "iii", "iv", "v")}
    total = 0
    for kind in kinds:
        for _ in range(specs_per_kind):
            spec = _random_spec(rng, kind)
            x = rng.normal(0.0, 3.0, per)
            y = rng.normal(0.0, 3.0, per)
            eps = np.exp(rng.uniform(math.log(1e-3), math.log(10.0), per))
            dlt = np.exp(rng.uniform(math.log(1e-3), math.log(10.0), per))
            total += per
            viol_batch = _envelope_violations(spec, x, y, eps, dlt)
            for key, n in viol_batch.items():
                viol[key] += n
    passed = all(v == 0 for v in viol.values())
    return report("moreau_yosida_suite", passed, {"draws": total, "violations": viol},
                  {"n_draws": n_draws, "specs_per_kind": specs_per_kind}, seed)


def _envelope_violations(spec, x, y, eps, dlt) -> dict[str, int]:
    def tol(*vals):
        return 1e-9 * (1.0 + sum(np.abs(v) for v in vals))

    jx = convex.resolvent(spec, x, eps)
    gx = convex.yosida_gradient(spec, x, eps)
    gy = convex.yosida_gradient(spec, y, eps)
    gyd = convex.yosida_gradient(spec, y, dlt)
    env_x = convex.moreau_envelope(spec, x, eps)
    env_y = convex.moreau_envelope(spec, y, eps)
    env_m = convex.moreau_envelope(spec, 0.5 * (x + y), eps)
    theta_x = convex.eval_convex(spec, x)

    ident = np.abs(env_x - (0.5 * eps * gx**2 + convex.eval_convex(spec, jx))) > tol(env_x)
    below = env_x > theta_x + tol(env_x)
    midconv = env_m > 0.5 * (env_x + env_y) + tol(env_x, env_y)
    left, right = convex.subdiff_bounds(spec, jx)
    member = (gx < left - tol(gx)) | (gx > right + tol(gx)) | np.isnan(left)
    lip = np.abs(gx - gy) > np.abs(x - y) / eps + tol(gx, gy)
    mono = (gx - gy) * (x - y) < -tol((gx - gy) * (x - y))
    cross = (gx - gyd) * (x - y) < -(eps + dlt) * gx * gyd - tol((gx - gyd) * (x - y), (eps + dlt) * gx * gyd)
    return {"i": int(np.sum(ident | below | midconv)), "ii": int(np.sum(member)), "iii": int(np.sum(lip)),
            "iv": int(np.sum(mono)), "v": int(np.sum(cross))}


# ------------------------------------------------------------ comparison
def _same_structure(p1: Problem, p2: Problem) -> None:
    a, b = p1.to_config(), p2.to_config()
    for key in ("domain", "constraints", "x0", "grid", "monte_carlo", "solver"):
        if a[key] != b[key]:
            raise BadParameter(f"comparison problems differ in {key!r}; only chi, f, g may differ")
    for role in ("h", "b", "sigma"):
        if a["coefficients"][role] != b["coefficients"][role]:
            raise BadParameter(f"comparison problems differ in coefficient {role!r}")


def comparison_check(p1: Problem, p2: Problem, bundle=None, threads: int = 1,
                     threshold: float = COMPARISON_THRESHOLD) -> dict[str, Any]:
    """Solve both problems on common noise and count nodes where ``Y1 > Y2 + tol``.

    The ordering ``chi1 <= chi2``, ``f1 <= f2``, ``g1 <= g2`` is sampled along
    the first solution; a sampled violation raises HypothesisViolation.
    ``tol`` at node ``k`` is three regression standard errors plus 1e-12.
    """
    _same_structure(p1, p2)
    fwd, bundle = run_forward(p1, bundle, threads=threads)
    s1 = solve_backward(fwd, bundle, p1.coeffs, p1.phi, p1.psi, p1.config)
    c1, c2 = p1.coeffs, p2.coeffs
    t = bundle.grid.nodes
    N = bundle.grid.N
    worst = {"chi": float(np.max(c1.chi(fwd.X[N]) - c2.chi(fwd.X[N])))}
    df, dg = -np.inf, -np.inf
    for k in range(N):
        x, y, z = fwd.X[k], s1.Y[k], s1.Z[k]
        df = max(df, float(np.max(c1.f(t[k], x, y, z) - c2.f(t[k], x, y, z))))
        dg = max(dg, float(np.max(c1.g(t[k], x, y) - c2.g(t[k], x, y))))
    worst.update(f=df, g=dg)
    bad = {k: v for k, v in worst.items() if v > 1e-12}
    if bad:
        raise HypothesisViolation(f"ordering of the data fails on samples: {bad}")
    s2 = solve_backward(fwd, bundle, p2.coeffs, p2.phi, p2.psi, p2.config)
    se = np.maximum(s1.y_se, s2.y_se)
    diff = s1.Y - s2.Y
    tol = 3.0 * se[:, None] + 1e-12
    frac = float(np.mean(diff > tol))
    excess = np.maximum(diff, 0.0)
    max_violation = float(np.max(excess))
    with np.errstate(divide="ignore", invalid="ignore"):
        in_se = np.where(excess > 1e-12, excess / np.maximum(se[:, None], 1e-300), 0.0)
    max_in_se = float(np.max(in_se))
    passed = frac < threshold and max_in_se < 3.0
    metrics = {"violation_fraction": frac, "max_violation": max_violation, "max_violation_in_se": max_in_se,
               "hypothesis_margins": worst, "mean_gap_y0": float(np.mean(s2.Y[0] - s1.Y[0]))}
    return report("comparison", passed, metrics, {"p1": p1.to_config(), "p2": p2.to_config()}, p1.seed)


# ------------------------------------------------------------ Yosida rate
def yosida_rate_fit(problem: Problem, eps_list: Sequence[float], bundle=None, threads: int = 1,
                    band: tuple[float, float] = RATE_BAND) -> dict[str, Any]:
    """Fit ``log gap(eps)`` against ``log eps``.

    ``gap(eps)`` is the mean over paths and nodes of ``|Y^eps - Y^ref|^2``
    with the resolvent solve as reference.  ``slope`` is None when every gap is
    zero (nothing to approximate).
    """
    eps = [float(e) for e in eps_list]
    if len(eps) < 3 or any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
        raise BadParameter("eps_list needs >= 3 strictly decreasing positive values")
    fwd, bundle = run_forward(problem, bundle, threads=threads)
    ref_cfg = SolverConfig(RESOLVENT, basis_degree=problem.config.basis_degree, z_clip=problem.config.z_clip,
                           noise_scheme=problem.config.noise_scheme)
    ref = solve_backward(fwd, bundle, problem.coeffs, problem.phi, problem.psi, ref_cfg)
    gaps = []
    for e in eps:
        cfg = SolverConfig(YOSIDA, eps=e, basis_degree=ref_cfg.basis_degree, z_clip=ref_cfg.z_clip,
                           noise_scheme=ref_cfg.noise_scheme)
        sol = solve_backward(fwd, bundle, problem.coeffs, problem.phi, problem.psi, cfg)
        gaps.append(float(np.mean((sol.Y - ref.Y) ** 2)))
    gaps_arr = np.array(gaps)
    if np.all(gaps_arr == 0):
        slope = None
        passed = True
    elif np.any(gaps_arr <= 0):
        slope = None
        passed = False
    else:
        slope = float(np.polyfit(np.log(eps), np.log(gaps_arr), 1)[0])
        passed = band[0] <= slope <= band[1]
    rms_slope = None if slope is None else 0.5 * slope
    metrics = {"eps": eps, "gaps": gaps, "slope": slope, "rms_slope": rms_slope, "band": list(band)}
    return report("yosida_rate", passed, metrics, {"problem": problem.to_config(), "eps": eps}, problem.seed)


# ------------------------------------------------------------ coefficient moduli
def coefficient_spot_check(coeffs, n: int = 2000, seed: int = 0, dim: int = 1, y_scale: float = 1.0,
                           rho: ModulusRho | None = None) -> dict[str, Any]:
    """Random-pair checks of the driver modulus bounds and the one-sided condition on g.

    ``|f(y1,z1) - f(y2,z2)|^2 <= rho(|dy|^2) + K |dz|^2``,
    ``|h(y1) - h(y2)|^2 <= rho(|dy|^2)`` and
    ``(y1 - y2)(g(y1) - g(y2)) <= beta |dy|^2`` with ``rho`` from the
    coefficient metadata unless given.
    """
    rho = ModulusRho.from_config(coeffs.modulus) if rho is None else rho
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0)
    x = rng.normal(size=(n, dim))
    y1 = rng.normal(0.0, y_scale, n)
    # half of the pairs are close, where non-Lipschitz moduli matter
    y2 = y1 + np.where(rng.random(n) < 0.5, rng.normal(0.0, 1e-3, n), rng.normal(0.0, y_scale, n))
    z1 = rng.normal(size=(n, dim))
    z2 = rng.normal(size=(n, dim))
    dy2 = (y1 - y2) ** 2
    dz2 = np.sum((z1 - z2) ** 2, axis=1)
    r = rho_eval(rho, dy2)
    lhs_f = (coeffs.f(t, x, y1, z1) - coeffs.f(t, x, y2, z2)) ** 2
    lhs_h = (coeffs.h(t, x, y1) - coeffs.h(t, x, y2)) ** 2
    lhs_g = (y1 - y2) * (coeffs.g(t, x, y1) - coeffs.g(t, x, y2))
    tol = 1e-12
    viol = {
        "f": int(np.sum(lhs_f > r + coeffs.K * dz2 + tol)),
        "h": int(np.sum(lhs_h > r + tol)),
        "g": int(np.sum(lhs_g > coeffs.beta * dy2 + tol)),
    }
    return report("coefficient_moduli", all(v == 0 for v in viol.values()), {"pairs": n, "violations": viol},
                  coeffs.to_config(), seed)
