import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lrm.calibration import CalibrationParams, effective_noise
from lrm.datagen import Gaussian, gen_dataset, gen_ground_truth, gen_masks
from lrm.densela import schatten, schatten_pow
from lrm.errors import ConfigurationError, InvalidInputError, InvalidParameterError
from lrm.metrics import (basic_inequality, bound_check, error_report, noise_matrix,
                         noise_matrix_norm, prediction_error, schatten_error)
from lrm.sampling import SamplingOperator, operator_norm
from lrm.solver import EstimatorConfig, FitResult, fit


def dataset(scenario="usr", m=6, t=5, n=60, r=2, sigma=0.5, seed=0):
    truth = gen_ground_truth(m, t, r, 2.0, seed)
    op = gen_masks(scenario, m, t, n, seed + 1)
    return gen_dataset(truth, op, Gaussian(sigma), seed + 2, scenario)


def fake_fit(a):
    return FitResult(a, 0.0, 0, True, 0.0)


def test_prediction_error_examples(rng):
    data = dataset()
    a = data.truth.a_star
    assert prediction_error(data.op, a, a) == 0.0
    op = SamplingOperator.from_points(2, 2, [0], [0])
    a_hat, a_star = rng.standard_normal((2, 2, 2))
    assert prediction_error(op, a_hat, a_star) == pytest.approx((a_hat[0, 0] - a_star[0, 0]) ** 2)


def test_prediction_error_direct_sum(rng):
    data = dataset("gaussian_dense", 4, 3, 30)
    a_hat = rng.standard_normal((4, 3))
    stack = data.op.dense_stack()
    diff = a_hat - data.truth.a_star
    direct = sum(np.sum(stack[i] * diff) ** 2 for i in range(data.n)) / data.n
    assert prediction_error(data.op, a_hat, data.truth.a_star) == pytest.approx(direct, rel=1e-12)


def test_prediction_error_shape_mismatch():
    data = dataset()
    with pytest.raises(InvalidInputError):
        prediction_error(data.op, np.zeros((2, 2)), np.zeros((2, 2)))


def test_noise_matrix_norm_examples():
    op = SamplingOperator.from_points(3, 3, [0], [0])
    assert noise_matrix_norm(op, np.array([2.0])) == pytest.approx(2.0)
    assert noise_matrix_norm(op, np.zeros(1)) == 0.0
    with pytest.raises(InvalidInputError):
        noise_matrix_norm(op, np.zeros(2))


def test_noise_matrix_concentration_tau4():
    m = t = 20
    hits = 0
    for k in range(200):
        op = gen_masks("cs", m, t, m * t, seed=k)
        xi = np.random.default_rng(10_000 + k).standard_normal(op.n)
        tau = effective_noise("tau4", CalibrationParams(sigma=1.0, m=m, t=t, n_obs=op.n))
        hits += noise_matrix_norm(op, xi) <= tau
    assert hits >= 190


def test_schatten_error_examples(rng):
    a = rng.standard_normal((3, 3))
    assert schatten_error(a, a, 1.0) == 0.0
    assert schatten_error(np.diag([3.0, 2.0]), np.diag([1.0, 1.0]), 2.0) == pytest.approx(5.0)
    b = rng.standard_normal((3, 3))
    sv = np.linalg.svd(a - b, compute_uv=False)
    assert schatten_error(a, b, 1.5) == pytest.approx(np.sum(sv ** 1.5), rel=1e-10)
    with pytest.raises(InvalidParameterError):
        schatten_error(a, b, 0.0)


def test_error_report_fields():
    data = dataset()
    rep = error_report(data.op, data.truth.a_star * 0.5, data.truth.a_star, qs=(1.0, 2.0))
    assert rep.pred_sq > 0 and rep.rank_hat == 2
    assert rep.frob_per_entry == pytest.approx(rep.schatten_q[2.0] / 30)


def test_bound_check_exact_fit_holds():
    data = dataset()
    params = CalibrationParams(sigma=0.5, h=0.5, phi_max1=1.0, m=6, t=5, n_obs=60, p=1.0)
    for bound in ("thm1", "usr_s1", "cs_s1"):
        chk = bound_check(bound, data, fake_fit(data.truth.a_star), params)
        assert chk.lhs == 0.0 and chk.holds


def test_bound_check_rhs_formulas():
    data = dataset("usr", 20, 20, 2000, sigma=1.0)
    params = CalibrationParams(sigma=1.0, h=1.0, d_conf=2.0, phi_max1=1.1, m=20, t=20,
                               n_obs=2000, p=1.0)
    nuc = schatten(data.truth.a_star, 1)
    zero = fake_fit(np.zeros((20, 20)))
    c_bar = 4 * np.sqrt(20) + 16
    assert bound_check("usr_s1", data, zero, params).rhs == pytest.approx(16 * c_bar * nuc * 40 / 2000)
    assert bound_check("cs_s1", data, zero, params).rhs == pytest.approx(
        16 * 8 * np.sqrt(2) * nuc * np.sqrt(40) / 2000)
    tau1 = effective_noise("tau1", params)
    assert bound_check("thm1", data, zero, params).rhs == pytest.approx(16 * tau1 * nuc)


def test_rate_only_bounds_have_no_flag():
    data = dataset()
    params = CalibrationParams(sigma=0.5, phi_max1=1.0)
    chk = bound_check("thm4i", data, fake_fit(np.zeros((6, 5))), params)
    assert chk.holds is None and chk.ratio == pytest.approx(chk.lhs / chk.rhs)


def test_bound_check_errors():
    data = dataset()
    with pytest.raises(ConfigurationError):
        bound_check("usr_s1", data, fake_fit(np.zeros((6, 5))), CalibrationParams(sigma=1.0))
    with pytest.raises(ConfigurationError):
        bound_check("nope", data, fake_fit(np.zeros((6, 5))), CalibrationParams(sigma=1.0))
    with pytest.raises(InvalidInputError):
        bound_check("mt_ri", data, fake_fit(np.zeros((6, 5))), CalibrationParams(sigma=1.0))
    data.truth = None
    with pytest.raises(InvalidInputError):
        bound_check("thm1", data, fake_fit(np.zeros((6, 5))), CalibrationParams(sigma=1.0))


@given(st.integers(0, 2 ** 32 - 1))
def test_stochastic_term_identity_and_duality(seed):
    r = np.random.default_rng(seed)
    data = dataset(seed=int(r.integers(1000)))
    b = r.standard_normal((6, 5))
    xi = data.xi
    stoch = float(np.dot(xi, data.op.traces(b))) / data.n
    big_m = noise_matrix(data.op, xi)
    assert stoch == pytest.approx(np.sum(big_m * b), abs=1e-10)
    assert abs(stoch) <= schatten(b, 1) * noise_matrix_norm(data.op, xi) + 1e-10


@given(st.integers(0, 2 ** 32 - 1))
def test_prediction_error_below_c0_frobenius(seed):
    r = np.random.default_rng(seed)
    data = dataset(seed=int(r.integers(1000)))
    a_hat = r.standard_normal((6, 5))
    c0 = operator_norm(data.op) ** 2
    diff = a_hat - data.truth.a_star
    assert prediction_error(data.op, a_hat, data.truth.a_star) <= c0 * np.sum(diff ** 2) + 1e-9


def test_basic_inequality_after_fit():
    data = dataset()
    for p in (1.0, 0.5):
        res = fit(data, EstimatorConfig(p=p, lam=0.3, warm_start_truth=True))
        lhs, rhs = basic_inequality(data, res.a_hat, p, 0.3)
        assert lhs <= rhs + 1e-8
        assert lhs == pytest.approx(prediction_error(data.op, res.a_hat, data.truth.a_star))
    assert schatten_pow(data.truth.a_star, 1.0) > 0
