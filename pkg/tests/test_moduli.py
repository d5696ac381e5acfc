import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vibdsde.errors import BadParameter, QuadratureFailure
from vibdsde.verify.moduli import ModulusRho, bihari_bound, modulus_invariants, reciprocal_integral, rho_eval

RHO1 = ModulusRho("rho1", delta=0.2)
RHO2 = ModulusRho("rho2", delta=0.01)


def test_rho_examples():
    assert rho_eval(RHO1, 0.0) == 0.0
    assert rho_eval(RHO1, math.exp(-2)) == pytest.approx(2 * math.exp(-2), abs=1e-12)
    assert rho_eval(RHO1, math.exp(-2)) == pytest.approx(0.27067, abs=1e-5)
    assert rho_eval(ModulusRho("lipschitz", K=3.0), 0.5) == 1.5
    u = 1e-3
    L = math.log(1 / u)
    assert rho_eval(RHO2, u) == pytest.approx(u * L * math.log(L))


@pytest.mark.parametrize("rho", [RHO1, RHO2, ModulusRho("rho1", delta=0.05, scale=2.0)])
def test_continuous_and_c1_at_delta(rho):
    d = rho.delta
    h = 1e-9
    lo, at, hi = rho_eval(rho, np.array([d - h, d, d + h]))
    assert abs(hi - lo) < 1e-8 and abs(at - lo) < 1e-8
    left = (at - rho_eval(rho, d - 1e-6)) / 1e-6
    right = (rho_eval(rho, d + 1e-6) - at) / 1e-6
    assert left == pytest.approx(right, rel=1e-4)
    assert right == pytest.approx(rho.scale * rho.kappa, rel=1e-4)


def test_kappa_closed_forms():
    assert RHO1.kappa == pytest.approx(math.log(5) - 1)
    L = math.log(100)
    assert RHO2.kappa == pytest.approx((L - 1) * math.log(L) - 1)


def test_parameter_validation():
    with pytest.raises(BadParameter):
        ModulusRho("rho1", delta=0.5)
    with pytest.raises(BadParameter):
        ModulusRho("rho2", delta=0.2)
    with pytest.raises(BadParameter):
        ModulusRho("rho3")
    with pytest.raises(BadParameter):
        ModulusRho("lipschitz", K=0.0)
    with pytest.raises(BadParameter):
        rho_eval(RHO1, -1e-3)
    with pytest.raises(BadParameter):
        ModulusRho.from_config({"kind": "rho1", "kappa": 1.0})


@pytest.mark.parametrize("rho", [RHO1, RHO2, ModulusRho("lipschitz", K=2.0)])
def test_invariants(rho):
    inv = modulus_invariants(rho)
    assert inv["rho_at_zero"] == 0.0
    assert inv["positive"] and inv["nondecreasing"] and inv["concave"]
    assert inv["integral_matches_closed_form"] and inv["integral_increasing"]


def test_reciprocal_integral_matches_antiderivative():
    a, b = 1e-50, 0.01
    assert reciprocal_integral(RHO1, a, b) == pytest.approx(RHO1.antiderivative_of_reciprocal(a, b), rel=1e-8)
    with pytest.raises(BadParameter):
        reciprocal_integral(RHO1, 0.0, b)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 0.36), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_rho1_concave_nondecreasing_on_random_pairs(delta, u, v):
    rho = ModulusRho("rho1", delta=delta)
    a, b = min(u, v), max(u, v)
    ra, rb, rm = rho_eval(rho, np.array([a, b, 0.5 * (a + b)]))
    assert rb >= ra - 1e-12
    assert rm >= 0.5 * (ra + rb) - 1e-12


def test_bihari_examples():
    one = lambda s: 1.0
    assert bihari_bound(1.0, one, math.sqrt, 1.0) == pytest.approx(2.25, rel=1e-9)
    assert bihari_bound(2.0, lambda s: 0.5, lambda u: u, 1.0) == pytest.approx(2 * math.exp(0.5), rel=1e-9)
    assert bihari_bound(0.0, one, RHO1, 1.0) == 0.0


def test_bihari_zero_start_without_divergence():
    # int du/sqrt(u) converges at 0, so the bound leaves zero: u' = sqrt(u), u(0) = 0 gives t^2 / 4
    assert bihari_bound(0.0, lambda s: 1.0, math.sqrt, 1.0) == pytest.approx(0.25, rel=1e-8)


def test_bihari_blow_up():
    assert bihari_bound(1.0, lambda s: 2.0, lambda u: u * u, 1.0) == math.inf


def test_bihari_monotone_in_alpha_and_forcing():
    w = lambda u: float(rho_eval(RHO1, u))
    alphas = [0.01, 0.05, 0.1, 0.5, 1.0]
    by_alpha = [bihari_bound(a, lambda s: 1.0, w, 1.0) for a in alphas]
    assert all(b > a for a, b in zip(by_alpha, by_alpha[1:]))
    cs = [0.1, 0.5, 1.0, 2.0]
    by_c = [bihari_bound(0.1, lambda s, c=c: c, w, 1.0) for c in cs]
    assert all(b > a for a, b in zip(by_c, by_c[1:]))


def test_bihari_errors():
    with pytest.raises(QuadratureFailure):
        bihari_bound(1.0, lambda s: math.nan, math.sqrt, 1.0)
    with pytest.raises(BadParameter):
        bihari_bound(-1.0, lambda s: 1.0, math.sqrt, 1.0)
