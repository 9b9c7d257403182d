"""Schatten-p penalized least squares.

Minimizes ``N^-1 sum (y_i - tr(X_i' A))^2 + lambda * ||A||_{S_p}^p`` by
proximal gradient: accelerated with monotone restarts for p = 1, and plain
multi-start descent for p < 1 (a stationary point, not a certified global
minimizer).
"""

from dataclasses import dataclass, field
from itertools import islice

import numpy as np

from .calibration import CalibrationParams, lambda_auto
from .densela import as_matrix, schatten_pow
from .errors import ConfigurationError, DivergenceError, InvalidInputError, InvalidParameterError
from .prox import ProxParams, matrix_prox
from .sampling import design_constants, gram_max_cross, lipschitz, operator_norm, phi_max1

__all__ = [
    "EstimatorConfig",
    "FitResult",
    "objective",
    "fit",
    "closed_form_complete",
    "resolve_lambda",
    "complete_params",
    "is_complete_design",
]


@dataclass
class EstimatorConfig:
    """Solver settings.

    ``lam`` is either a number or a string ``"auto:<bound-tag>"``; in the
    latter case ``calibration`` supplies the noise-level inputs and any
    design-dependent field left as None is computed from the data.
    """

    p: float = 1.0
    lam: object = 0.0
    calibration: CalibrationParams = None
    max_iters: int = 5000
    rel_tol: float = 1e-9
    restarts: int = 5
    step: str = "fixed"
    seed: int = 0
    warm_start_truth: bool = False

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise InvalidParameterError(f"p must lie in (0, 1], got {self.p}")
        if not self.rel_tol > 0:
            raise InvalidParameterError("rel_tol must be positive")
        if self.restarts < 1:
            raise InvalidParameterError("restarts must be at least 1")
        if self.max_iters < 1:
            raise InvalidParameterError("max_iters must be at least 1")
        if self.step not in ("fixed", "backtracking"):
            raise InvalidParameterError(f"unknown step rule {self.step!r}")


@dataclass
class FitResult:
    a_hat: np.ndarray
    objective: float
    iterations: int
    converged: bool
    lambda_used: float
    objective_trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "a_hat": self.a_hat.tolist(),
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "lambda_used": self.lambda_used,
        }


def objective(data, a, p, lam):
    """Penalized empirical risk of ``a`` on ``data``."""
    a = as_matrix(a)
    if a.shape != (data.m, data.t):
        raise InvalidInputError(f"expected a {data.m}x{data.t} matrix, got {a.shape}")
    resid = data.y - data.op.traces(a)
    penalty = lam * schatten_pow(a, p) if lam else 0.0
    return float(np.dot(resid, resid) / data.n + penalty)


def complete_params(params, data):
    """Fill design-dependent calibration fields that were left as None."""
    params = params or CalibrationParams()
    changes = {}
    if params.m is None:
        changes["m"] = data.m
    if params.t is None:
        changes["t"] = data.t
    if params.n_obs is None:
        changes["n_obs"] = data.n
    if params.sigma is None and data.noise is not None:
        changes["sigma"] = data.noise.sigma
    if params.h is None and data.noise is not None:
        # Gaussian moments satisfy the Bernstein condition with H = sigma
        changes["h"] = getattr(data.noise, "h", data.noise.sigma)
    return params.with_(**changes) if changes else params


def _fill_design_fields(bound, params, op):
    changes = {}
    if bound in ("tau1", "thm4i") and params.phi_max1 is None:
        changes["phi_max1"] = phi_max1(op)
    if bound == "tau6" and params.gram_max_cross is None:
        changes["gram_max_cross"] = gram_max_cross(op)
    if bound in ("tau_row", "tau_col") and None in (params.s_row, params.h_row,
                                                    params.s_col, params.h_col):
        s_row, h_row, s_col, h_col = design_constants(op)
        changes.update(s_row=s_row, h_row=h_row, s_col=s_col, h_col=h_col)
    return params.with_(**changes) if changes else params


def resolve_lambda(data, config):
    """Numeric penalty weight for ``config`` on ``data``."""
    lam = config.lam
    if isinstance(lam, str):
        if not lam.startswith("auto:"):
            raise ConfigurationError(f"lambda must be a number or 'auto:<bound>', got {lam!r}")
        bound = lam[5:]
        if config.calibration is None:
            raise ConfigurationError("automatic lambda needs calibration parameters")
        params = complete_params(config.calibration, data)
        params = _fill_design_fields(bound, params, data.op)
        if bound == "tau7" and params.p is None:
            params = params.with_(p=config.p)
        return float(lambda_auto(bound, params))
    lam = float(lam)
    if not lam >= 0:
        raise InvalidParameterError("lambda must be nonnegative")
    return lam


def is_complete_design(op):
    """True for point masks observing every cell exactly once."""
    if op.kind != "point" or op.n != op.m * op.t:
        return False
    counts = np.bincount(op.rows * op.t + op.cols, minlength=op.m * op.t)
    return bool(np.all(counts == 1))


def closed_form_complete(data, p, lam):
    """Exact minimizer on a complete design: a single prox of the filled-in response matrix."""
    op = data.op
    if not is_complete_design(op):
        raise InvalidInputError("closed form needs every cell observed exactly once")
    y_hat = np.zeros((op.m, op.t))
    y_hat[op.rows, op.cols] = data.y
    if lam == 0:
        return y_hat
    return matrix_prox(y_hat, ProxParams(p, lam, op.n / 2.0))


class _Problem:
    def __init__(self, data, p, lam):
        self.data, self.p, self.lam = data, p, lam
        self.op = data.op
        self.b = self.op.weighted_sum(data.y) / self.op.n
        self.floor = 1e-15 * max(float(np.mean(data.y ** 2)), 1e-300)

    def value(self, a):
        f = objective(self.data, a, self.p, self.lam)
        if not np.isfinite(f):
            raise DivergenceError("objective became non-finite")
        return f

    def smooth(self, a):
        resid = self.data.y - self.op.traces(a)
        return float(np.dot(resid, resid) / self.op.n)

    def grad(self, a):
        return 2.0 * (self.op.normal(a) - self.b)

    def prox(self, z, eta):
        return matrix_prox(z, ProxParams(self.p, self.lam, eta))

    def done(self, f_old, f_new, rel_tol):
        return abs(f_old - f_new) <= rel_tol * abs(f_new) + self.floor


def _step(prob, x, eta, backtrack):
    """One proximal gradient step from ``x``; returns (new point, step used)."""
    g = prob.grad(x)
    if not backtrack:
        return prob.prox(x - eta * g, eta), eta
    fx = prob.smooth(x)
    while True:
        cand = prob.prox(x - eta * g, eta)
        d = cand - x
        if prob.smooth(cand) <= fx + np.sum(g * d) + np.sum(d * d) / (2 * eta) + 1e-12 * abs(fx):
            return cand, eta
        eta *= 0.5
        if eta < 1e-300:
            raise DivergenceError("backtracking step collapsed")


def _initial_step(op, step):
    lip = lipschitz(op) if step == "fixed" else operator_norm(op) ** 2
    return 1.0 / (2.0 * lip) if lip > 0 else 1.0


def _accelerated(prob, x0, eta, config):
    backtrack = config.step == "backtracking"
    x = x_prev = x0
    f = prob.value(x)
    trace = [f]
    t = 1.0
    for it in range(1, config.max_iters + 1):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x + ((t - 1.0) / t_next) * (x - x_prev)
        cand, eta = _step(prob, y, eta, backtrack)
        f_cand = prob.value(cand)
        if f_cand > f:
            # momentum restart: a plain step from x cannot increase the objective
            t_next = 1.0
            cand, eta = _step(prob, x, eta, backtrack)
            f_cand = prob.value(cand)
        x_prev, x, t = x, cand, t_next
        f_old, f = f, f_cand
        trace.append(f)
        if prob.done(f_old, f, config.rel_tol):
            return x, f, it, True, trace
    return x, f, config.max_iters, False, trace


def _plain(prob, x0, eta, config):
    backtrack = config.step == "backtracking"
    x = x0
    f = prob.value(x)
    trace = [f]
    for it in range(1, config.max_iters + 1):
        x, eta = _step(prob, x, eta, backtrack)
        f_old, f = f, prob.value(x)
        trace.append(f)
        if prob.done(f_old, f, config.rel_tol):
            return x, f, it, True, trace
    return x, f, config.max_iters, False, trace


def _starting_points(data, config, lam):
    """Initial points for the nonconvex multi-start, in priority order."""
    op = data.op
    yield np.zeros((op.m, op.t))
    back = op.weighted_sum(data.y) / op.n
    lb = op.traces(back)
    denom = float(np.dot(lb, lb))
    yield back * (float(np.dot(data.y, lb)) / denom if denom > 0 else 0.0)
    convex = EstimatorConfig(p=1.0, lam=lam, max_iters=config.max_iters,
                             rel_tol=config.rel_tol, step=config.step)
    yield fit(data, convex).a_hat
    rng = np.random.default_rng(config.seed)
    r = max(1, min(op.m, op.t) // 4)
    rand = rng.standard_normal((op.m, r)) @ rng.standard_normal((op.t, r)).T
    yield rand * (np.linalg.norm(back) / max(np.linalg.norm(rand), 1e-300))
    if is_complete_design(op):
        yield closed_form_complete(data, config.p, lam)


def fit(data, config):
    """Compute the Schatten-p estimator for ``data``."""
    if data.n < 1:
        raise InvalidInputError("need at least one observation")
    lam = resolve_lambda(data, config)
    prob = _Problem(data, config.p, lam)
    eta = _initial_step(data.op, config.step)
    if config.p == 1:
        x, f, its, conv, trace = _accelerated(prob, np.zeros((data.m, data.t)), eta, config)
        return FitResult(x, f, its, conv, lam, trace)
    best = None
    starts = list(islice(_starting_points(data, config, lam), config.restarts))
    if config.warm_start_truth and data.truth is not None:
        starts.append(None)
    for start in starts:
        if start is None:
            # truth warm start only when no restart reached the truth's objective
            f_star = prob.value(data.truth.a_star)
            if best.objective <= f_star + 1e-8 * (1 + abs(f_star)):
                break
            start = data.truth.a_star.copy()
        x, f, its, conv, trace = _plain(prob, start, eta, config)
        if best is None or f < best.objective:
            best = FitResult(x, f, its, conv, lam, trace)
    return best
