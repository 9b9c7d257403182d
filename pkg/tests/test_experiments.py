import numpy as np
import pytest

from lrm.errors import ConfigurationError, InvalidParameterError
from lrm.experiments import (CSV_HEADER, StudyConfig, coverage_study, loglog_slope, noise_study,
                             rate_study, splitmix64, trial_seed)


def test_splitmix_reference_values():
    # first outputs of the reference generator seeded with 0
    state = 0
    outs = []
    for _ in range(3):
        outs.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_trial_seeds_distinct():
    seeds = {trial_seed(7, i, k) for i in range(5) for k in range(50)}
    assert len(seeds) == 250


def test_loglog_slope_exact():
    ns = np.array([100, 200, 400, 800])
    slope, err = loglog_slope(ns, 3.0 / ns)
    assert slope == pytest.approx(-1.0, abs=1e-12) and err == pytest.approx(0.0, abs=1e-12)


def test_noiseless_unregularized_rate_is_at_solver_floor():
    cfg = StudyConfig("gaussian_dense", 4, 4, 2, [48, 96], trials=3, lam=0.0, sigma=0.0,
                      rel_tol=1e-14, max_iters=20000)
    res = rate_study(cfg)
    for med, _ in res.summary["per_n"].values():
        assert med <= 1e-10
    assert res.basic_inequality_ok()


def test_rank_doubling_roughly_doubles_error():
    meds = []
    for r in (2, 4):
        cfg = StudyConfig("gaussian_dense", 10, 10, r, [1000], trials=10, spectral_scale=50.0,
                          master_seed=3)
        meds.append(rate_study(cfg).summary["per_n"][1000][0])
    assert 1.5 < meds[1] / meds[0] < 3


def test_forced_truth_coverage_is_one():
    cfg = StudyConfig("usr", 6, 6, 2, [50, 100], trials=4, lam="auto:tau2", noise="bernstein",
                      h=1.0, force_truth=True)
    res = coverage_study(cfg, "usr_s1")
    assert all(rate == 1.0 for _, rate in res.summary["per_n"].values())
    assert all(row["bound_lhs"] == 0.0 for row in res.rows)


def test_noise_study_tiny_sigma_always_holds():
    cfg = StudyConfig("cs", 5, 5, 1, [25], trials=5, sigma=1e-12)
    res = noise_study(cfg, "tau4")
    assert res.summary["per_n"][25][1] == 1.0
    assert max(row["bound_lhs"] for row in res.rows) < 1e-11


def test_noise_study_bernstein_tau2():
    cfg = StudyConfig("usr", 20, 20, 1, [1000], trials=30, noise="bernstein", h=1.0)
    assert noise_study(cfg, "tau2").summary["per_n"][1000][1] >= 0.95


def test_csv_layout_and_order():
    cfg = StudyConfig("usr", 4, 4, 1, [20, 40], trials=3, lam=0.1)
    res = rate_study(cfg)
    lines = res.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 7
    keys = [(int(l.split(",")[4]), int(l.split(",")[5])) for l in lines[1:]]
    assert keys == sorted(keys)
    summary = res.summary_csv().splitlines()
    assert summary[0] == "N,median_pred_sq,holds_rate" and summary[-1].startswith("slope,")


def test_parallel_and_serial_csv_identical():
    base = dict(scenario="usr", m=5, t=5, r=1, n_grid=[30, 60], trials=3, lam="auto:tau2",
                noise="bernstein", h=1.0, master_seed=11)
    serial = coverage_study(StudyConfig(**base), "usr_s1").to_csv()
    parallel = coverage_study(StudyConfig(**base, parallelism=3), "usr_s1").to_csv()
    assert serial == parallel


def test_multitask_study_runs():
    cfg = StudyConfig("multitask", 4, 3, 1, [30, 60], trials=2, lam=0.05)
    res = rate_study(cfg)
    assert len(res.rows) == 4 and res.basic_inequality_ok()


def test_nonconvex_rows_satisfy_basic_inequality():
    cfg = StudyConfig("usr", 6, 6, 2, [60], trials=3, p=0.5, lam=0.2)
    assert rate_study(cfg).basic_inequality_ok()


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        StudyConfig("usr", 4, 4, 1, [20, 10])
    with pytest.raises(InvalidParameterError):
        StudyConfig("usr", 4, 4, 1, [20], trials=0)
    with pytest.raises(InvalidParameterError):
        StudyConfig("multitask", 4, 3, 1, [10])
    with pytest.raises(ConfigurationError):
        StudyConfig("bogus", 4, 4, 1, [20])
    cfg = StudyConfig("usr", 4, 4, 1, [20])
    with pytest.raises(ConfigurationError):
        coverage_study(cfg, "thm4i")
    with pytest.raises(ConfigurationError):
        noise_study(cfg, "tau7")
