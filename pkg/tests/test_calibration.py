from math import e, log, sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lrm.calibration import (BOUND_TAGS, TAU_TAGS, CalibrationParams, c_kappa, effective_noise,
                             lambda_auto, p_auto, ri_inflation)
from lrm.errors import ConfigurationError, InvalidParameterError

BASE = CalibrationParams(sigma=1.0, d_conf=2.0, h=1.0, b_conf=2.0, a_conf=2.0, theta_conf=1.0,
                         m=10, t=10, n_obs=100, p=0.5, phi_max1=1.0, s_row=0.3, h_row=1.0,
                         s_col=0.3, h_col=1.0, gram_max_cross=3.0)


def test_tau1_worked_value():
    assert effective_noise("tau1", BASE) == pytest.approx(8 * sqrt(0.2), rel=1e-12)
    assert effective_noise("tau1", BASE) == pytest.approx(3.5777087639996634, rel=1e-10)


def test_tau2_worked_value():
    assert effective_noise("tau2", BASE) == pytest.approx((4 * sqrt(20) + 16) * 0.2, rel=1e-12)


def test_tau4_worked_value():
    assert effective_noise("tau4", BASE) == pytest.approx(8 * sqrt(2) * sqrt(20) / 100, rel=1e-12)
    assert lambda_auto("tau4", BASE) == pytest.approx(2.0238577025077632, rel=1e-12)


def test_remaining_formulas():
    assert effective_noise("tau3", BASE) == pytest.approx(sqrt(2) * log(11) / 10)
    assert effective_noise("tau5", BASE) == pytest.approx((4 * sqrt(80) + 320) / 100)
    assert effective_noise("tau6", BASE) == pytest.approx(sqrt(4 * log(20)) / 100 * 3.0)
    kappa = 1.5 / 1.0
    ck = (2 * kappa - 1) * 2 * kappa * kappa ** (-1 / (2 * kappa - 1))
    assert c_kappa(0.5) == pytest.approx(ck)
    assert effective_noise("tau7", BASE) == pytest.approx(ck * (2 * 0.1) ** 0.75)
    c_row = sqrt(2 * 2 * 0.09) + 4 * sqrt(log(10) / 100)
    assert effective_noise("tau_row", BASE) == pytest.approx(c_row * sqrt(10 * log(10) / 100))
    assert effective_noise("tau_col", BASE) == pytest.approx(c_row * sqrt(10 * log(10) / 100))


def test_thm4i_lambda():
    assert lambda_auto("thm4i", BASE) == pytest.approx(32 * sqrt(0.2), rel=1e-12)
    with pytest.raises(ConfigurationError):
        effective_noise("thm4i", BASE)


@pytest.mark.parametrize("tag", TAU_TAGS)
def test_lambda_is_four_tau(tag):
    assert lambda_auto(tag, BASE) == 4 * effective_noise(tag, BASE)


def test_tiny_sigma_gives_tiny_lambda():
    assert lambda_auto("tau4", BASE.with_(sigma=1e-12)) < 1e-11


def test_missing_field_is_configuration_error():
    with pytest.raises(ConfigurationError):
        effective_noise("tau2", BASE.with_(h=None))
    with pytest.raises(ConfigurationError):
        effective_noise("tau9", BASE)


def test_tau7_needs_p_below_one():
    with pytest.raises(InvalidParameterError):
        effective_noise("tau7", BASE.with_(p=1.0))


@given(st.sampled_from([t for t in BOUND_TAGS if t != "tau7"]), st.floats(0.1, 5.0),
       st.floats(1.01, 3.0), st.integers(20, 5000), st.floats(1.0, 3.0))
def test_monotone_in_sigma_and_n(tag, sigma, factor, n, n_factor):
    q = BASE.with_(sigma=sigma, n_obs=n)
    lo = lambda_auto(tag, q)
    assert lambda_auto(tag, q.with_(sigma=sigma * factor)) >= lo
    assert lambda_auto(tag, q.with_(n_obs=int(n * n_factor) + 1)) <= lo


def test_p_auto_values():
    assert p_auto(int(round(e ** 2 * 1000)), 1000, 10) == pytest.approx(
        1 / log(round(e ** 2 * 1000) / 1000))
    assert p_auto(100, 10, 10) == 1 / log(10)
    assert p_auto(28, 10, 3) == 1 / log(2.8)
    with pytest.raises(InvalidParameterError):
        p_auto(27, 10, 10)


def test_p_auto_at_e_squared():
    assert p_auto(e ** 2 * 7, 7, 1) == pytest.approx(0.5, rel=1e-14)


def test_ri_inflation_values():
    a, delta0 = ri_inflation(1.0)
    assert a == 19
    assert delta0 == pytest.approx(0.5 * (1 - 3 / sqrt(9.5)), rel=1e-12)
    assert ri_inflation(0.5)[0] == 9
    with pytest.raises(InvalidParameterError):
        ri_inflation(0.0)


def test_tau7_theorem_scaling():
    # constant frozen from a one-off scan of N/M in [e^2, 1e9]
    c = 7.0
    for big_m in (2, 5, 10, 40, 100, 500):
        for n in np.unique(np.geomspace(np.ceil(e ** 2 * big_m), 1e9, 50).astype(int)):
            p = p_auto(int(n), big_m, big_m)
            tau = effective_noise("tau7", CalibrationParams(m=big_m, t=big_m, n_obs=int(n), p=p))
            assert tau <= c * 1.0 * big_m / (n * p)
