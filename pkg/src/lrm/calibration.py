"""Effective noise levels and regularization parameters.

Every ``tau*`` tag evaluates a closed-form high-probability bound on the
spectral norm of the noise matrix ``N^-1 sum xi_i X_i`` (or, for ``tau7``,
on the stochastic term under nonconvex penalties). The regularization
parameter is ``lambda = 4 * tau``; the ``thm4i`` tag is the one explicit
exception with its own formula.
"""

from dataclasses import dataclass, fields, replace
from math import e, log, sqrt

import mpmath

from .errors import ConfigurationError, InvalidParameterError

__all__ = [
    "CalibrationParams",
    "BOUND_TAGS",
    "TAU_TAGS",
    "effective_noise",
    "lambda_auto",
    "p_auto",
    "ri_inflation",
    "c_kappa",
]

TAU_TAGS = ("tau1", "tau2", "tau3", "tau4", "tau5", "tau6", "tau7", "tau_row", "tau_col")
BOUND_TAGS = TAU_TAGS + ("thm4i",)


@dataclass(frozen=True)
class CalibrationParams:
    """Inputs of the noise-level formulas; fields a bound does not use may stay None."""

    sigma: float = None
    d_conf: float = 2.0
    h: float = None
    b_conf: float = None
    a_conf: float = None
    theta_conf: float = 1.0
    c_star: float = None
    m: int = None
    t: int = None
    n_obs: int = None
    p: float = None
    phi_max1: float = None
    s_row: float = None
    h_row: float = None
    s_col: float = None
    h_col: float = None
    gram_max_cross: float = None

    def with_(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


_REQUIRED = {
    "tau1": ("sigma", "d_conf", "phi_max1", "m", "t", "n_obs"),
    "tau2": ("sigma", "d_conf", "h", "m", "t", "n_obs"),
    "tau3": ("sigma", "b_conf", "m", "t", "n_obs"),
    "tau4": ("sigma", "d_conf", "m", "t", "n_obs"),
    "tau5": ("sigma", "d_conf", "h", "m", "t", "n_obs"),
    "tau6": ("sigma", "a_conf", "gram_max_cross", "m", "t", "n_obs"),
    "tau7": ("theta_conf", "p", "m", "t", "n_obs"),
    "tau_row": ("sigma", "d_conf", "h", "s_row", "h_row", "m", "n_obs"),
    "tau_col": ("sigma", "d_conf", "h", "s_col", "h_col", "t", "n_obs"),
    "thm4i": ("sigma", "phi_max1", "m", "t", "n_obs"),
}


def _require(bound, params):
    if bound not in _REQUIRED:
        raise ConfigurationError(f"unknown bound tag {bound!r}; expected one of {BOUND_TAGS}")
    missing = [name for name in _REQUIRED[bound] if getattr(params, name) is None]
    if missing:
        raise ConfigurationError(f"{bound} needs {', '.join(missing)}")
    if params.n_obs < 1:
        raise InvalidParameterError("n_obs must be at least 1")
    if "sigma" in _REQUIRED[bound] and not params.sigma > 0:
        raise InvalidParameterError("sigma must be positive")


def c_kappa(p):
    """``(2k - 1)(2k) k^(-1/(2k-1))`` with ``k = (2 - p)/(2 - 2p)``; needs 0 < p < 1."""
    if not 0 < p < 1:
        raise InvalidParameterError(f"c_kappa needs 0 < p < 1, got {p}")
    kappa = (2.0 - p) / (2.0 - 2.0 * p)
    return (2 * kappa - 1) * (2 * kappa) * kappa ** (-1.0 / (2 * kappa - 1))


def effective_noise(bound, params):
    """Effective noise level ``tau`` for the given bound tag."""
    _require(bound, params)
    q = params
    n = q.n_obs
    if bound == "thm4i":
        raise ConfigurationError("thm4i defines lambda directly; use lambda_auto")
    if bound == "tau1":
        return 4 * sqrt(2 * q.d_conf) * q.sigma * q.phi_max1 * sqrt((q.m + q.t) / n)
    if bound == "tau2":
        return (4 * q.sigma * sqrt(10 * q.d_conf) + 8 * q.h * q.d_conf) * (q.m + q.t) / n
    if bound == "tau3":
        return sqrt(q.b_conf) * q.sigma * log(max(q.m + 1, q.t + 1)) / sqrt(n)
    if bound == "tau4":
        return 8 * q.sigma * sqrt(q.d_conf) * sqrt(q.m + q.t) / n
    if bound == "tau5":
        k = q.m + q.t
        return (4 * q.sigma * sqrt(2 * q.d_conf * k) + 8 * q.h * q.d_conf * k) / n
    if bound == "tau6":
        if not q.a_conf > 1:
            raise InvalidParameterError("tau6 needs a_conf > 1")
        return q.sigma * sqrt(2 * q.a_conf * log(q.m + q.t)) / n * q.gram_max_cross
    if bound == "tau7":
        big_m = max(q.m, q.t)
        ratio = (q.theta_conf / q.p) * (big_m / n)
        return c_kappa(q.p) * ratio ** (1 - q.p / 2)
    if bound == "tau_row":
        return _bernstein_line(q, q.m, q.s_row, q.h_row)
    return _bernstein_line(q, q.t, q.s_col, q.h_col)


def _bernstein_line(q, dim, s_line, h_line):
    if dim < 2:
        raise InvalidParameterError("row/column bounds need a dimension of at least 2")
    n = q.n_obs
    c_line = sqrt(2 * q.d_conf * q.sigma ** 2 * s_line ** 2) + \
        2 * q.d_conf * h_line * q.h * sqrt(log(dim) / n)
    return c_line * sqrt(dim * log(dim) / n)


def lambda_auto(bound, params):
    """Regularization parameter: ``4 * tau``, or the explicit ``thm4i`` formula."""
    if bound == "thm4i":
        _require(bound, params)
        q = params
        return 32 * q.sigma * q.phi_max1 * sqrt((q.m + q.t) / q.n_obs)
    return 4 * effective_noise(bound, params)


def p_auto(n_obs, m, t):
    """Exponent ``1 / log(N / M)`` with ``M = max(m, t)``; needs ``N > e * M``."""
    big_m = max(m, t)
    if not n_obs > e * big_m:
        raise InvalidParameterError(f"p_auto needs N > e*M = {e * big_m:.4f}, got N={n_obs}")
    return 1.0 / log(n_obs / big_m)


def ri_inflation(p):
    """Rank inflation ``a(p)`` and RI tolerance ``delta0(p)``.

    ``a(p)`` is the least integer strictly above ``(6**(1/p)/sqrt(2))**(2p/(2-p))``
    and ``delta0(p) = (1 - 3**(1/p) * (a/2)**(1/2 - 1/p)) / 2``.
    """
    if not 0 < p <= 1:
        raise InvalidParameterError(f"p must lie in (0, 1], got {p}")
    with mpmath.workdps(60):
        mp_p = mpmath.mpf(p)
        bound = (6 ** (1 / mp_p) / mpmath.sqrt(2)) ** (2 * mp_p / (2 - mp_p))
        nearest = mpmath.nint(bound)
        # an exact integer bound (p = 1 gives 18) must still be exceeded strictly
        a = int(nearest) + 1 if abs(bound - nearest) < mpmath.mpf(10) ** -40 else int(mpmath.floor(bound)) + 1
    delta0 = 0.5 * (1 - 3 ** (1 / p) * (a / 2) ** (0.5 - 1 / p))
    return int(a), float(delta0)
