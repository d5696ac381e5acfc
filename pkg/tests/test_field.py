import math

import numpy as np
import pytest
from scipy.special import erf

from vibdsde.backward import SolverConfig
from vibdsde.coefficients import CoefficientSet, make_coefficient as mk
from vibdsde.convex import ConvexSpec
from vibdsde.errors import BadParameter
from vibdsde.field import FieldGrid, build_field, field_diagnostics
from vibdsde.forward import DomainSpec
from vibdsde.noise import make_time_grid

ZERO = ConvexSpec.zero()
HALF = DomainSpec.half_space(1)
SMOOTH = CoefficientSet(chi=mk("chi", {"name": "cosine", "a": 1.0, "k": 1.5, "c": 2.0}),
                        f=mk("f", {"name": "linear", "a": -0.3}))


def _field(coeffs=SMOOTH, dom=HALF, phi=ZERO, times=(0.0, 0.5, 1.0), points=(0.0, 0.4, 0.8), N=50, M=4000,
           seed=1, scenario_seed=None):
    grid = FieldGrid(list(times), [[p] for p in points], scenario_seed)
    return build_field(grid, dom, coeffs, phi, ZERO, SolverConfig(), make_time_grid(0, 1, N), M, seed)


def _half_line_exact(t, x, T=1.0):
    s = T - t
    if s == 0:
        return x
    return x * erf(x / math.sqrt(2 * s)) + math.sqrt(2 * s / math.pi) * math.exp(-x * x / (2 * s))


def test_terminal_row_is_chi_exactly():
    res = _field()
    assert np.array_equal(res.u[-1], SMOOTH.chi(res.points))
    assert field_diagnostics(res, HALF, ZERO, ZERO, SMOOTH)["terminal_mismatch"] == 0


@pytest.mark.slow
def test_half_line_against_reflected_bm_identity():
    coeffs = CoefficientSet(chi=mk("chi", {"name": "linear", "a": 1.0, "c": 0.0}))
    res = _field(coeffs, times=(0.0,), points=(0.0, 0.5, 1.0), N=2000, M=100_000, seed=3)
    exact = np.array([_half_line_exact(0.0, x) for x in (0.0, 0.5, 1.0)])
    assert np.max(np.abs(res.u[0] / exact - 1)) < 0.02


def test_interval_constraint_contains_field():
    phi = ConvexSpec.indicator(-0.1, 2.5)
    res = _field(phi=phi)
    inner = res.u[:-1]  # the terminal row is chi itself
    assert np.all((inner >= -0.1) & (inner <= 2.5))
    assert field_diagnostics(res, HALF, phi, ZERO, SMOOTH)["membership_violations"] == 0


def test_same_seed_same_report():
    a, b = _field(), _field()
    assert field_diagnostics(a, HALF, ZERO, ZERO, SMOOTH) == field_diagnostics(b, HALF, ZERO, ZERO, SMOOTH)


def test_smooth_case_x_exponent():
    res = _field(dom=DomainSpec.whole_space(1), times=(0.0, 0.5), points=tuple(np.linspace(0.1, 0.5, 5)),
                 M=20_000)
    ex = field_diagnostics(res, DomainSpec.whole_space(1), ZERO, ZERO, SMOOTH)["exponent_x"]
    assert 1.5 <= ex <= 2.5


def test_h_zero_field_ignores_scenario():
    a = _field(scenario_seed=10)
    b = _field(scenario_seed=11)
    assert np.array_equal(a.u, b.u)


def test_forward_seed_changes_only_within_mc_error():
    coeffs = SMOOTH.with_(h=mk("h", {"name": "exp_beta", "beta": 0.4}))
    a = _field(coeffs, seed=1, scenario_seed=5, times=(0.0, 0.5), M=20_000)
    b = _field(coeffs, seed=2, scenario_seed=5, times=(0.0, 0.5), M=20_000)
    se = np.sqrt(a.std_err**2 + b.std_err**2)
    assert np.all(np.abs(a.u - b.u) <= 3 * se + 1e-12)


def test_scenario_seed_shifts_field_when_h_active():
    coeffs = SMOOTH.with_(h=mk("h", {"name": "exp_beta", "beta": 0.4}))
    a = _field(coeffs, scenario_seed=5, times=(0.0,), M=20_000)
    b = _field(coeffs, scenario_seed=6, times=(0.0,), M=20_000)
    se = np.sqrt(a.std_err**2 + b.std_err**2)
    assert np.all(np.abs(a.u - b.u) > 3 * se)


def test_grid_validation():
    with pytest.raises(BadParameter):
        FieldGrid([0.5, 0.2], [[0.0]])
    with pytest.raises(BadParameter):
        _field(points=(-0.5, 0.2))
    with pytest.raises(BadParameter):
        _field(times=(0.013,))
    res = _field(times=(0.0,), points=(0.0, 0.4))
    with pytest.raises(BadParameter):
        field_diagnostics(res, HALF, ZERO, ZERO, SMOOTH)


def test_threads_do_not_change_field():
    grid = FieldGrid([0.0, 0.5], [[0.0], [0.3]])
    args = (grid, HALF, SMOOTH, ZERO, ZERO, SolverConfig(), make_time_grid(0, 1, 40), 3000, 4)
    assert np.array_equal(build_field(*args, threads=1).u, build_field(*args, threads=3).u)


def test_std_err_covers_seed_to_seed_spread():
    coeffs = SMOOTH.with_(h=mk("h", {"name": "exp_beta", "beta": 0.4}))
    vals, ses = [], []
    for seed in range(20):
        r = _field(coeffs, phi=ConvexSpec.indicator(-0.1, 1.5), times=(0.0,), points=(0.2,), M=3000, seed=seed,
                   scenario_seed=5)
        vals.append(r.u[0, 0])
        ses.append(r.std_err[0, 0])
    assert np.std(vals, ddof=1) <= 1.5 * np.mean(ses)
