import json

import numpy as np
import pytest

from vibdsde.coefficients import CoefficientSet, make_coefficient as mk
from vibdsde.convex import ConvexSpec
from vibdsde.errors import BadParameter, HypothesisViolation
from vibdsde.forward import DomainSpec
from vibdsde.noise import make_time_grid
from vibdsde.problem import Problem
from vibdsde.verify.checks import comparison_check, moreau_yosida_suite, report, yosida_rate_fit

BASE = Problem(dom=DomainSpec.half_space(1), x0=(0.2,), grid=make_time_grid(0, 1, 40), M=3000, seed=2,
               coeffs=CoefficientSet(f=mk("f", {"name": "linear", "a": 0.5}), g=mk("g", {"name": "constant", "c": 0.2}),
                                     chi=mk("chi", {"name": "constant", "c": 0.0})))


def test_report_shape_and_json():
    r = report("x", True, {"a": np.float64(1.5), "b": np.array([1, 2])}, {"k": 1}, 7)
    assert set(r) == {"name", "pass", "metrics", "config_hash", "seed"}
    assert json.loads(json.dumps(r))["metrics"] == {"a": 1.5, "b": [1, 2]}
    assert len(r["config_hash"]) == 16 and r["config_hash"] == report("y", False, {}, {"k": 1}, 0)["config_hash"]


def test_moreau_yosida_suite_clean():
    r = moreau_yosida_suite(n_draws=2000, seed=3)
    assert r["pass"] and sum(r["metrics"]["violations"].values()) == 0
    assert r["metrics"]["draws"] == 2000


def test_comparison_constant_terminal_gap():
    p2 = BASE.with_(coeffs=BASE.coeffs.with_(chi=mk("chi", {"name": "constant", "c": 1.0})))
    r = comparison_check(BASE, p2)
    assert r["pass"]
    assert r["metrics"]["violation_fraction"] == 0.0
    assert r["metrics"]["mean_gap_y0"] > 0.5


def test_comparison_ordered_drivers_and_boundary_terms_with_constraint():
    phi = ConvexSpec.indicator(-1.0, 1.0)
    p1 = BASE.with_(phi=phi, coeffs=BASE.coeffs.with_(chi=mk("chi", {"name": "cosine", "a": 0.5, "k": 2.0, "c": 0.0})))
    p2 = p1.with_(coeffs=p1.coeffs.with_(f=mk("f", {"name": "linear", "a": 0.5, "c": 0.3}),
                                         g=mk("g", {"name": "constant", "c": 0.5})))
    r = comparison_check(p1, p2)
    assert r["pass"] and r["metrics"]["violation_fraction"] < 0.005


def test_comparison_rejects_unordered_data():
    p2 = BASE.with_(coeffs=BASE.coeffs.with_(chi=mk("chi", {"name": "constant", "c": -1.0})))
    with pytest.raises(HypothesisViolation):
        comparison_check(BASE, p2)


def test_comparison_requires_same_structure():
    with pytest.raises(BadParameter):
        comparison_check(BASE, BASE.with_(M=100))
    with pytest.raises(BadParameter):
        comparison_check(BASE, BASE.with_(phi=ConvexSpec.indicator(-1, 1)))


def test_rate_fit_zero_gaps_when_unconstrained():
    r = yosida_rate_fit(BASE.with_(M=500), [0.2, 0.1, 0.05])
    assert r["pass"] and r["metrics"]["slope"] is None
    assert r["metrics"]["gaps"] == [0.0, 0.0, 0.0]


def test_rate_fit_zero_gaps_when_constraint_inactive():
    r = yosida_rate_fit(BASE.with_(M=500, phi=ConvexSpec.indicator(hi=100.0)), [0.2, 0.1, 0.05])
    assert r["metrics"]["gaps"] == [0.0, 0.0, 0.0]


def test_rate_fit_gaps_shrink_when_active():
    p = Problem(coeffs=CoefficientSet(f=mk("f", {"name": "linear", "a": 1.0})), phi=ConvexSpec.indicator(hi=2.0),
                grid=make_time_grid(0, 1, 100), M=1)
    r = yosida_rate_fit(p, [0.2, 0.1, 0.05, 0.025])
    gaps = r["metrics"]["gaps"]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert r["metrics"]["slope"] > 0


def test_rate_fit_validation():
    with pytest.raises(BadParameter):
        yosida_rate_fit(BASE, [0.1, 0.2, 0.05])
    with pytest.raises(BadParameter):
        yosida_rate_fit(BASE, [0.1, 0.05])
