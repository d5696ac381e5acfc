import math

import numpy as np
import pytest

from vibdsde.coefficients import CoefficientSet, make_coefficient as mk
from vibdsde.convex import ConvexSpec
from vibdsde.errors import BadParameter
from vibdsde.forward import DomainSpec
from vibdsde.verify.oracles import oracle_solve

SLAB = DomainSpec.ball(1.0, 0.05, 1)


def test_linear_exp():
    assert oracle_solve("LinearExp", {"a": 1.0, "chi": 1.0, "T": 1.0, "t": 0.0}) == pytest.approx(2.71828, abs=1e-5)
    with pytest.raises(BadParameter):
        oracle_solve("LinearExp", {"a": 1.0, "chi": 1.0, "T": 1.0, "t": 2.0})


def test_clamped_ode_hits_cap_with_small_step_error():
    y0, err = oracle_solve("ClampedODE", {"a": 1.0, "chi": 1.0, "cap": 2.0, "T": 1.0, "t": 0.0, "with_error": True})
    assert y0 == 2.0
    assert err < 1e-4
    # before the cap binds the solution is the free exponential
    t = 1 - math.log(2.0) / 2
    y = oracle_solve("ClampedODE", {"a": 1.0, "chi": 1.0, "cap": 2.0, "T": 1.0, "t": t})
    assert y == pytest.approx(math.exp(1 - t), rel=1e-4)


def test_clamped_ode_step_halving_is_first_order():
    errs = [oracle_solve("ClampedODE", {"cap": None, "n_fine": n, "with_error": True})[1] for n in (200, 400, 800)]
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.05)


def test_doss_closed_form():
    v = oracle_solve("DossClosedForm", {"beta": 0.5, "chi": 1.0, "T": 1.0, "dB": 0.2})
    assert v == pytest.approx(math.exp(-0.025), rel=1e-12) and v == pytest.approx(0.97531, abs=1e-5)


def test_unknown_oracle_and_bad_params():
    with pytest.raises(BadParameter):
        oracle_solve("Spectral", {})
    with pytest.raises(BadParameter):
        oracle_solve("LinearExp", {"a": 1.0})
    with pytest.raises(BadParameter):
        oracle_solve("ClampedODE", {"n_fine": 3})
    with pytest.raises(BadParameter):
        oracle_solve("ClampedODE", {"a": 10.0, "n_fine": 4})


def _fd(coeffs, **kw):
    params = {"coeffs": coeffs, "dom": SLAB, "T": 1.0, "times": [0.0, 0.5], "points": [-1.0, -0.3, 0.0, 0.6, 1.0],
              "nx": 40, "nt": 200, "levels": 3}
    params.update(kw)
    return oracle_solve("FD1D", params)


def test_fd1d_neumann_cosine_mode():
    k = math.pi
    coeffs = CoefficientSet(chi=mk("chi", {"name": "cosine", "a": 1.0, "k": k, "c": 0.0}),
                            f=mk("f", {"name": "linear", "a": 0.4}))
    out = _fd(coeffs)
    t, x = np.meshgrid(out["times"], out["points"], indexing="ij")
    exact = np.exp((0.4 - 0.5 * k * k) * (1 - t)) * np.cos(k * x)
    assert np.max(np.abs(out["u"] - exact)) < 5e-3


def test_fd1d_constant_boundary_flux():
    g = 0.3
    coeffs = CoefficientSet(chi=mk("chi", {"name": "quadratic", "a": g / 2, "c": 0.0}),
                            g=mk("g", {"name": "constant", "c": g}))
    out = _fd(coeffs)
    t, x = np.meshgrid(out["times"], out["points"], indexing="ij")
    exact = g / 2 * (x * x + (1 - t))
    assert np.max(np.abs(out["u"] - exact)) < 5e-3


def test_fd1d_self_convergence_first_order():
    coeffs = CoefficientSet(chi=mk("chi", {"name": "quadratic", "a": 0.5, "c": 1.0}),
                            f=mk("f", {"name": "linear", "a": 0.5}), g=mk("g", {"name": "constant", "c": 0.3}))
    out = _fd(coeffs, phi=ConvexSpec.indicator(hi=2.0), times=[0.0, 0.2, 0.4, 0.6, 0.8],
              points=[-1.0, -0.5, 0.0, 0.5, 1.0], nx=100, nt=500)
    assert all(f >= 1.7 for f in out["factors"])
    assert np.all(out["u"][:-1] <= 2.0 + 1e-12)


def test_fd1d_validation():
    coeffs = CoefficientSet()
    with pytest.raises(BadParameter):
        _fd(coeffs, times=[0.013])
    with pytest.raises(BadParameter):
        _fd(coeffs, points=[1.5])
    with pytest.raises(BadParameter):
        _fd(coeffs, dom=DomainSpec.half_space(1))
    with pytest.raises(BadParameter):
        _fd(coeffs, levels=1)
    with pytest.raises(BadParameter):
        _fd(CoefficientSet(h=mk("h", {"name": "exp_beta", "beta": 0.5})))
