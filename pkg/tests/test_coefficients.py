import math

import numpy as np
import pytest

from vibdsde.coefficients import REGISTRY, CoefficientSet, make_coefficient as mk
from vibdsde.errors import BadParameter
from vibdsde.verify.checks import coefficient_spot_check

LOG_DAMPED = mk("f", {"name": "log_damped", "scale": 1.0, "delta": 0.1})


def test_every_registry_entry_builds_with_defaults():
    for role, entries in REGISTRY.items():
        for name in entries:
            if name in ("table",):
                continue
            c = mk(role, name)
            assert c.to_config()["name"] == name


def test_unknown_names_and_params_rejected():
    with pytest.raises(BadParameter, match="known"):
        mk("f", "quartic")
    with pytest.raises(BadParameter):
        mk("f", {"name": "linear", "slope": 2.0})
    with pytest.raises(BadParameter):
        mk("zeta", "zero")
    with pytest.raises(BadParameter):
        mk("h", {"beta": 0.5})
    with pytest.raises(BadParameter):
        CoefficientSet.from_config({"ff": "zero"})
    with pytest.raises(BadParameter):
        CoefficientSet(alpha=1.0)


def test_config_roundtrip():
    cfg = {"f": {"name": "linear", "a": 0.5, "c": 0.1}, "g": {"name": "constant", "c": 0.3},
           "h": {"name": "exp_beta", "beta": 0.4}, "chi": {"name": "cosine", "a": 1.0, "k": 2.0, "c": 0.0},
           "modulus": {"kind": "rho1", "delta": 0.1, "scale": 1.5}, "alpha": 0.3}
    c = CoefficientSet.from_config(cfg)
    assert CoefficientSet.from_config(c.to_config()) == c
    assert c.to_config()["alpha"] == 0.3


def test_coefficient_values():
    x = np.array([[0.5], [-1.0]])
    y = np.array([2.0, -1.0])
    assert list(mk("f", {"name": "linear", "a": 2.0, "c": 1.0})(0.0, x, y, np.zeros((2, 1)))) == [5.0, -1.0]
    assert list(mk("chi", "abs")(x)) == [0.5, 1.0]
    h = mk("h", {"name": "exp_beta", "beta": 0.5})
    assert list(h(0.0, x, y)) == [1.0, -0.5] and list(h.dy(0.0, x, y)) == [0.5, 0.5]


def test_log_damped_driver_is_odd_and_non_lipschitz():
    y = np.array([1e-8, 1e-4, 0.05])
    f = LOG_DAMPED(0.0, np.zeros((3, 1)), y, None)
    assert np.allclose(LOG_DAMPED(0.0, np.zeros((3, 1)), -y, None), -f)
    # difference quotient at 0 grows without bound
    q = f / y
    assert np.all(np.diff(q[::-1]) > 0) and q[0] > 4
    assert f[0] == pytest.approx(1e-8 * math.sqrt(math.log(1e8)))


def test_log_damped_continuous_at_delta():
    d = 0.1
    y = np.array([d - 1e-9, d + 1e-9])
    f = LOG_DAMPED(0.0, np.zeros((2, 1)), y, None)
    assert abs(f[1] - f[0]) < 1e-8


@pytest.mark.parametrize("cfg, modulus", [
    ({"f": {"name": "linear", "a": 0.9}, "h": {"name": "sine", "amp": 0.5}, "g": {"name": "linear", "a": -1.0}},
     {"kind": "lipschitz", "K": 1.0}),
    ({"f": {"name": "log_damped", "scale": 1.0, "delta": 0.1}}, {"kind": "rho1", "delta": 0.1, "scale": 1.5}),
])
def test_spot_check_passes_for_admissible_sets(cfg, modulus):
    c = CoefficientSet.from_config({**cfg, "modulus": modulus})
    for y_scale in (0.05, 1.0, 5.0):
        r = coefficient_spot_check(c, n=5000, y_scale=y_scale)
        assert r["pass"], r["metrics"]


def test_spot_check_flags_bad_sets():
    # log-damped driver is not Lipschitz near 0
    c = CoefficientSet(f=LOG_DAMPED)
    r = coefficient_spot_check(c, y_scale=0.05)
    assert not r["pass"] and r["metrics"]["violations"]["f"] > 0
    # increasing g breaks the one-sided condition with beta = 0
    c = CoefficientSet(g=mk("g", {"name": "linear", "a": 1.0}))
    assert coefficient_spot_check(c)["metrics"]["violations"]["g"] == 2000
