"""Error measures and checks of the explicit-constant prediction bounds."""

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .calibration import effective_noise
from .densela import as_matrix, numerical_rank, schatten, schatten_pow
from .errors import ConfigurationError, InvalidInputError, InvalidParameterError

__all__ = [
    "ErrorReport",
    "BoundCheck",
    "BOUND_IDS",
    "EXPLICIT_BOUNDS",
    "prediction_error",
    "noise_matrix",
    "noise_matrix_norm",
    "schatten_error",
    "error_report",
    "bound_check",
    "basic_inequality",
]

EXPLICIT_BOUNDS = ("thm1", "usr_s1", "cs_s1")
BOUND_IDS = EXPLICIT_BOUNDS + ("thm4i", "mt_ri")
RANK_HAT_TOL = 1e-6


@dataclass
class ErrorReport:
    pred_sq: float
    schatten_q: dict = field(default_factory=dict)
    frob_per_entry: float = 0.0
    rank_hat: int = 0


@dataclass
class BoundCheck:
    """``lhs <= rhs`` for explicit bounds; ``holds`` is None for rate-only bounds."""

    bound_id: str
    lhs: float
    rhs: float
    holds: object = None

    @property
    def ratio(self):
        return self.lhs / self.rhs if self.rhs > 0 else float("inf")


def _pair(op, a_hat, a_star):
    a_hat, a_star = as_matrix(a_hat, "a_hat"), as_matrix(a_star, "a_star")
    if a_hat.shape != a_star.shape or a_hat.shape != (op.m, op.t):
        raise InvalidInputError("matrix shapes do not match the sampling operator")
    return a_hat, a_star


def prediction_error(op, a_hat, a_star):
    """Squared empirical prediction distance ``|L(a_hat - a_star)|_2^2``."""
    a_hat, a_star = _pair(op, a_hat, a_star)
    v = op.apply(a_hat - a_star)
    return float(np.dot(v, v))


def noise_matrix(op, xi):
    """``N^-1 sum xi_i X_i``."""
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (op.n,):
        raise InvalidInputError(f"noise vector must have length {op.n}")
    return op.weighted_sum(xi) / op.n


def noise_matrix_norm(op, xi):
    """Spectral norm of the noise matrix (scaled by ``1/N``, not ``1/sqrt(N)``)."""
    return schatten(noise_matrix(op, xi), np.inf)


def schatten_error(a_hat, a_star, q):
    """``||a_hat - a_star||_{S_q}^q``."""
    if not q > 0:
        raise InvalidParameterError("q must be positive")
    return schatten_pow(as_matrix(a_hat) - as_matrix(a_star), q)


def error_report(op, a_hat, a_star, qs=(1.0, 2.0)):
    a_hat, a_star = _pair(op, a_hat, a_star)
    diff = a_hat - a_star
    return ErrorReport(
        pred_sq=prediction_error(op, a_hat, a_star),
        schatten_q={q: schatten_error(a_hat, a_star, q) for q in qs},
        frob_per_entry=float(np.sum(diff * diff) / diff.size),
        rank_hat=numerical_rank(a_hat, RANK_HAT_TOL),
    )


def basic_inequality(data, a_hat, p, lam):
    """Both sides of the basic inequality for a fit with known truth.

    Returns ``(lhs, rhs)`` with ``lhs`` the squared prediction error and
    ``rhs = (2/N) sum xi_i tr((a_hat - a*)' X_i) + lam (||a*||_p^p - ||a_hat||_p^p)``.
    """
    if data.truth is None:
        raise InvalidInputError("basic inequality needs ground truth")
    a_star = data.truth.a_star
    lhs = prediction_error(data.op, a_hat, a_star)
    stoch = 2.0 * float(np.dot(data.xi, data.op.traces(a_hat - a_star))) / data.n
    rhs = stoch + lam * (schatten_pow(a_star, p) - schatten_pow(a_hat, p))
    return lhs, rhs


def bound_check(bound_id, data, fit, params, tau_bound="tau1"):
    """Compare the prediction error of ``fit`` with a published bound.

    ``thm1`` uses ``16 tau ||A*||_p^p`` with ``tau`` from ``tau_bound``;
    ``usr_s1`` and ``cs_s1`` are the USR and collaborative-sampling
    matrix-completion bounds for p = 1. ``thm4i`` and ``mt_ri`` carry
    unspecified constants, so only the rate factor is reported.
    """
    if data.truth is None:
        raise InvalidInputError("bound checks need ground truth")
    a_star = data.truth.a_star
    lhs = prediction_error(data.op, fit.a_hat, a_star)
    q = params
    m, t, n = data.m, data.t, data.n
    needed = {"usr_s1": ("sigma", "h", "d_conf"), "cs_s1": ("sigma", "d_conf"),
              "thm4i": ("sigma", "phi_max1")}.get(bound_id, ())
    missing = [name for name in needed if getattr(q, name) is None]
    if missing:
        raise ConfigurationError(f"{bound_id} needs {', '.join(missing)}")
    if bound_id == "thm1":
        p = q.p if q.p is not None else 1.0
        rhs = 16 * effective_noise(tau_bound, q) * schatten_pow(a_star, p)
    elif bound_id == "usr_s1":
        c_bar = 4 * q.sigma * sqrt(10 * q.d_conf) + 8 * q.h * q.d_conf
        rhs = 16 * c_bar * schatten_pow(a_star, 1.0) * (m + t) / n
    elif bound_id == "cs_s1":
        c_bar = 8 * q.sigma * sqrt(q.d_conf)
        rhs = 16 * c_bar * schatten_pow(a_star, 1.0) * sqrt(m + t) / n
    elif bound_id == "thm4i":
        rhs = q.sigma * q.phi_max1 * schatten_pow(a_star, 1.0) * sqrt((m + t) / n)
        return BoundCheck(bound_id, lhs, rhs, None)
    elif bound_id == "mt_ri":
        if data.n_per_task is None:
            raise InvalidInputError("mt_ri needs a multitask dataset")
        rhs = data.truth.r * (m + t) / (data.n_per_task * t)
        return BoundCheck(bound_id, lhs, rhs, None)
    else:
        raise ConfigurationError(f"unknown bound id {bound_id!r}; expected one of {BOUND_IDS}")
    return BoundCheck(bound_id, lhs, rhs, bool(lhs <= rhs))
