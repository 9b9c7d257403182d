"""Seeded Monte Carlo studies written out as CSV tables.

Three studies share one trial loop:

* ``rate_study`` fits the estimator on a grid of sample sizes and reports
  the log-log slope of the median prediction error;
* ``coverage_study`` checks an explicit-constant prediction bound per trial;
* ``noise_study`` compares the spectral norm of the noise matrix with an
  effective noise level.

Every trial draws its data from a seed derived only from the master seed
and the trial coordinates, so results do not depend on execution order or
on the number of worker processes.
"""

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import isfinite

import numpy as np

from .calibration import CalibrationParams, effective_noise
from .datagen import SCENARIOS, BoundedBernstein, Gaussian, gen_dataset, gen_ground_truth, gen_masks
from .errors import ConfigurationError, DivergenceError, InvalidParameterError
from .densela import numerical_rank, schatten_pow
from .metrics import (EXPLICIT_BOUNDS, RANK_HAT_TOL, basic_inequality, bound_check,
                      noise_matrix_norm, prediction_error)
from .solver import (EstimatorConfig, FitResult, _fill_design_fields, complete_params, fit,
                     objective, resolve_lambda)

__all__ = [
    "StudyConfig",
    "StudyResult",
    "CSV_HEADER",
    "SUMMARY_HEADER",
    "NOISE_BOUNDS",
    "splitmix64",
    "trial_seed",
    "rate_study",
    "coverage_study",
    "noise_study",
    "loglog_slope",
]

CSV_HEADER = ("scenario", "m", "T", "r", "N", "trial", "seed", "p", "lambda", "pred_sq",
              "frob_sq", "schatten1", "rank_hat", "bound_id", "bound_lhs", "bound_rhs",
              "holds", "iters", "converged")
SUMMARY_HEADER = ("N", "median_pred_sq", "holds_rate")
NOISE_BOUNDS = ("tau1", "tau2", "tau4", "tau5", "tau6", "tau_row", "tau_col")
BASIC_BOUND = "basic"
BASIC_SLACK = 1e-8

_MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One step of the SplitMix64 output function on a 64-bit integer."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed, n_index, trial):
    """Per-trial seed from the master seed and the trial coordinates."""
    z = splitmix64(int(master_seed) & _MASK64)
    z = splitmix64(z ^ int(n_index))
    return splitmix64(z ^ int(trial))


@dataclass
class StudyConfig:
    """Settings shared by all studies.

    ``lam`` is a number or ``"auto:<tag>"``. For the multitask scenario each
    N in ``n_grid`` must be a multiple of ``t``. ``noise`` is ``"gaussian"``
    or ``"bernstein"`` (Rademacher with scale ``sigma`` and bound ``h``);
    ``sigma = 0`` gives noiseless data. ``force_truth`` replaces the fit by
    the ground truth and exists for testing the bookkeeping.
    """

    scenario: str
    m: int
    t: int
    r: int
    n_grid: list
    trials: int = 20
    p: float = 1.0
    lam: object = "auto:tau1"
    sigma: float = 1.0
    noise: str = "gaussian"
    h: float = None
    d_conf: float = 2.0
    master_seed: int = 0
    parallelism: int = 1
    spectral_scale: float = 1.0
    max_iters: int = 5000
    rel_tol: float = 1e-9
    restarts: int = 5
    force_truth: bool = False

    def __post_init__(self):
        self.n_grid = [int(n) for n in self.n_grid]
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}")
        if self.trials < 1:
            raise InvalidParameterError("trials must be at least 1")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise InvalidParameterError("n_grid must be nonempty and strictly increasing")
        if self.parallelism < 1:
            raise InvalidParameterError("parallelism must be at least 1")
        if self.sigma < 0:
            raise InvalidParameterError("sigma must be nonnegative")
        if self.noise not in ("gaussian", "bernstein"):
            raise ConfigurationError(f"unknown noise kind {self.noise!r}")
        if self.scenario == "multitask" and any(n % self.t for n in self.n_grid):
            raise InvalidParameterError("multitask N values must be multiples of T")
        # validates p, lam type and solver settings early
        self.estimator(None)

    def noise_model(self):
        if self.sigma == 0:
            return None
        if self.noise == "bernstein":
            return BoundedBernstein(self.sigma, self.h if self.h is not None else self.sigma)
        return Gaussian(self.sigma)

    def calibration(self):
        h = self.h if self.h is not None else (self.sigma if self.noise == "bernstein" else None)
        return CalibrationParams(sigma=self.sigma or None, d_conf=self.d_conf, h=h)

    def estimator(self, seed):
        return EstimatorConfig(p=self.p, lam=self.lam, calibration=self.calibration(),
                               max_iters=self.max_iters, rel_tol=self.rel_tol,
                               restarts=self.restarts, seed=0 if seed is None else seed,
                               warm_start_truth=True)


@dataclass
class StudyResult:
    """Per-trial rows sorted by (N, trial) plus the per-N summary.

    Rows carry the CSV columns and, beyond them, the basic-inequality sides
    ``basic_lhs``/``basic_rhs`` and a ``diverged`` flag.
    """

    config: StudyConfig
    rows: list
    summary: dict = field(default_factory=dict)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in self.rows:
            w.writerow([_fmt(row[k]) for k in CSV_HEADER])
        return buf.getvalue()

    def summary_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for n, (med, rate) in sorted(self.summary["per_n"].items()):
            w.writerow([n, _fmt(med), _fmt(rate)])
        w.writerow(["slope", _fmt(self.summary["slope"]), _fmt(self.summary["slope_stderr"])])
        return buf.getvalue()

    def basic_inequality_ok(self):
        """True when every fitted row satisfies the basic inequality up to the slack."""
        return all(_basic_holds(row) for row in self.rows if row["basic_lhs"] is not None)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _basic_holds(row):
    lhs, rhs = row["basic_lhs"], row["basic_rhs"]
    return lhs <= rhs + BASIC_SLACK * (1.0 + abs(rhs))


def loglog_slope(ns, values):
    """Least-squares slope of ``log(values)`` on ``log(ns)`` and its standard error."""
    x, y = np.log(np.asarray(ns, float)), np.log(np.asarray(values, float))
    ok = np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size < 2:
        return float("nan"), float("nan")
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    if x.size < 3:
        return float(coef[0]), float("nan")
    resid = y - design @ coef
    s2 = float(resid @ resid) / (x.size - 2)
    stderr = np.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    return float(coef[0]), float(stderr)


def _make_data(cfg, n_obs, seed):
    rng = np.random.default_rng(seed)
    s_truth, s_mask, s_noise = (int(v) for v in rng.integers(0, 2 ** 63, size=3))
    truth = gen_ground_truth(cfg.m, cfg.t, cfg.r, cfg.spectral_scale, s_truth)
    n_per_task = n_obs // cfg.t if cfg.scenario == "multitask" else None
    op = gen_masks(cfg.scenario, cfg.m, cfg.t, n_per_task or n_obs, s_mask)
    return gen_dataset(truth, op, cfg.noise_model(), s_noise, cfg.scenario, n_per_task)


def _base_row(cfg, n_obs, trial, seed):
    return {"scenario": cfg.scenario, "m": cfg.m, "T": cfg.t, "r": cfg.r, "N": n_obs,
            "trial": trial, "seed": seed, "p": float(cfg.p), "lambda": None,
            "pred_sq": None, "frob_sq": None, "schatten1": None, "rank_hat": None,
            "bound_id": None, "bound_lhs": None, "bound_rhs": None, "holds": None,
            "iters": None, "converged": None, "basic_lhs": None, "basic_rhs": None,
            "diverged": False}


def _fit_trial(cfg, data, seed, row):
    if cfg.force_truth:
        a = data.truth.a_star.copy()
        lam = resolve_lambda(data, cfg.estimator(seed))
        result = FitResult(a, objective(data, a, cfg.p, lam), 0, True, lam)
    else:
        result = fit(data, cfg.estimator(seed))
    diff = result.a_hat - data.truth.a_star
    row.update({
        "lambda": float(result.lambda_used),
        "pred_sq": prediction_error(data.op, result.a_hat, data.truth.a_star),
        "frob_sq": float(np.sum(diff * diff)),
        "schatten1": schatten_pow(diff, 1.0),
        "rank_hat": numerical_rank(result.a_hat, RANK_HAT_TOL),
        "iters": int(result.iterations),
        "converged": bool(result.converged),
    })
    lhs, rhs = basic_inequality(data, result.a_hat, cfg.p, result.lambda_used)
    row["basic_lhs"], row["basic_rhs"] = float(lhs), float(rhs)
    return result


def _run_trial(task):
    kind, cfg, bound_id, n_index, trial = task
    n_obs = cfg.n_grid[n_index]
    seed = trial_seed(cfg.master_seed, n_index, trial)
    data = _make_data(cfg, n_obs, seed)
    row = _base_row(cfg, n_obs, trial, seed)
    if kind == "noise":
        params = _fill_design_fields(bound_id, complete_params(cfg.calibration(), data), data.op)
        tau = effective_noise(bound_id, params)
        norm = noise_matrix_norm(data.op, data.xi)
        row.update({"lambda": 4.0 * tau, "bound_id": bound_id, "bound_lhs": norm,
                    "bound_rhs": tau, "holds": bool(norm <= tau)})
        return row
    try:
        result = _fit_trial(cfg, data, seed, row)
    except DivergenceError:
        row.update({"diverged": True, "converged": False})
        return row
    if kind == "rate":
        row.update({"bound_id": BASIC_BOUND, "bound_lhs": row["basic_lhs"],
                    "bound_rhs": row["basic_rhs"], "holds": _basic_holds(row)})
    else:
        params = _fill_design_fields("tau1", complete_params(cfg.calibration(), data), data.op)
        params = params.with_(p=cfg.p)
        tau_bound = cfg.lam[5:] if isinstance(cfg.lam, str) else "tau1"
        chk = bound_check(bound_id, data, result, params, tau_bound=tau_bound)
        row.update({"bound_id": bound_id, "bound_lhs": chk.lhs, "bound_rhs": chk.rhs,
                    "holds": chk.holds})
    return row


def _run(kind, cfg, bound_id=None):
    tasks = [(kind, cfg, bound_id, i, k) for i in range(len(cfg.n_grid)) for k in range(cfg.trials)]
    if cfg.parallelism > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            rows = list(pool.map(_run_trial, tasks))
    else:
        rows = [_run_trial(t) for t in tasks]
    rows.sort(key=lambda row: (row["N"], row["trial"]))
    return StudyResult(cfg, rows, _summarize(cfg, rows))


def _summarize(cfg, rows):
    per_n = {}
    for n_obs in cfg.n_grid:
        sub = [row for row in rows if row["N"] == n_obs]
        preds = [row["pred_sq"] for row in sub
                 if not row["diverged"] and row["pred_sq"] is not None and isfinite(row["pred_sq"])]
        med = float(np.median(preds)) if preds else float("nan")
        flags = [row["holds"] for row in sub if row["holds"] is not None]
        rate = float(np.mean(flags)) if flags else float("nan")
        per_n[n_obs] = (med, rate)
    meds = [per_n[n][0] for n in cfg.n_grid]
    positive = [(n, v) for n, v in zip(cfg.n_grid, meds) if v > 0]
    slope, stderr = loglog_slope(*zip(*positive)) if positive else (float("nan"), float("nan"))
    return {"per_n": per_n, "slope": slope, "slope_stderr": stderr}


def rate_study(cfg):
    """Prediction error against N; rows record the basic inequality as the bound."""
    return _run("rate", cfg)


def coverage_study(cfg, bound_id):
    """Per-trial check of an explicit-constant bound (``thm1``, ``usr_s1`` or ``cs_s1``)."""
    if bound_id not in EXPLICIT_BOUNDS:
        raise ConfigurationError(
            f"coverage needs a bound with explicit constants {EXPLICIT_BOUNDS}, got {bound_id!r}")
    return _run("coverage", cfg, bound_id)


def noise_study(cfg, bound_id):
    """Spectral norm of the noise matrix against the effective noise level ``bound_id``."""
    if bound_id not in NOISE_BOUNDS:
        raise ConfigurationError(f"noise study needs one of {NOISE_BOUNDS}, got {bound_id!r}")
    if cfg.sigma == 0:
        raise InvalidParameterError("noise study needs sigma > 0")
    return _run("noise", cfg, bound_id)
