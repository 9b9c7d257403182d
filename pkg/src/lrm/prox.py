"""Proximal maps of ``lambda * ||X||_{S_p}^p`` for 0 < p <= 1.

The penalty is a function of the singular values only, so the matrix prox
reduces to the scalar problem

    min_{x >= 0}  (x - s)**2 / (2 * eta) + lambda * x**p

applied to each singular value ``s``.
"""

from dataclasses import dataclass

import numpy as np

from .densela import as_matrix, svd
from .errors import InvalidInputError, InvalidParameterError

__all__ = ["ProxParams", "scalar_prox", "matrix_prox", "threshold"]

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class ProxParams:
    p: float
    lam: float
    eta: float

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise InvalidParameterError(f"p must lie in (0, 1], got {self.p}")
        if not self.lam >= 0:
            raise InvalidParameterError(f"lambda must be nonnegative, got {self.lam}")
        if not self.eta > 0:
            raise InvalidParameterError(f"eta must be positive, got {self.eta}")


def threshold(params):
    """Input level below which the scalar prox returns 0.

    For p < 1 this is ``beta + mu * p * beta**(p - 1)`` with
    ``mu = lambda * eta`` and ``beta = (2 * mu * (1 - p))**(1 / (2 - p))``.
    """
    mu = params.lam * params.eta
    if params.p == 1:
        return mu
    if mu == 0:
        return 0.0
    p = params.p
    beta = (2.0 * mu * (1.0 - p)) ** (1.0 / (2.0 - p))
    return beta + mu * p * beta ** (p - 1.0)


def _objective(x, s, p, mu):
    return 0.5 * (x - s) ** 2 + mu * x ** p


def _larger_root(s, p, mu):
    # g(x) = x - s + mu p x^(p-1) is convex on x > 0 and positive at x = s,
    # so Newton from s decreases monotonically onto the larger root.
    lo = (mu * p * (1.0 - p)) ** (1.0 / (2.0 - p))  # minimizer of g
    hi = s
    x = s
    for _ in range(NEWTON_MAX_ITER):
        g = x - s + mu * p * x ** (p - 1.0)
        if abs(g) <= NEWTON_TOL * max(1.0, s):
            return x
        if g > 0:
            hi = x
        else:
            lo = x
        dg = 1.0 + mu * p * (p - 1.0) * x ** (p - 2.0)
        step = x - g / dg if dg > 0 else lo - 1.0
        x = step if lo < step < hi else 0.5 * (lo + hi)
    return x


def scalar_prox(sigma_in, params):
    """Global minimizer of ``(x - sigma_in)**2 / (2 eta) + lambda * x**p`` over x >= 0."""
    if sigma_in < 0:
        raise InvalidInputError("scalar_prox needs a nonnegative input")
    p = params.p
    mu = params.lam * params.eta
    if mu == 0 or sigma_in == 0:
        return float(sigma_in)
    if p == 1:
        return max(sigma_in - mu, 0.0)
    if sigma_in <= threshold(params):
        return 0.0
    root = _larger_root(sigma_in, p, mu)
    # the threshold test is exact in theory; the objective comparison guards rounding
    if _objective(root, sigma_in, p, mu) <= _objective(0.0, sigma_in, p, mu):
        return float(root)
    return 0.0


def matrix_prox(z, params, method="lapack"):
    """Apply :func:`scalar_prox` to the singular values of ``z``."""
    z = as_matrix(z)
    if params.lam == 0:
        return z.copy()
    f = svd(z, method=method)
    shrunk = np.array([scalar_prox(float(s), params) for s in f.singular_values])
    keep = shrunk > 0
    return (f.u[:, keep] * shrunk[keep]) @ f.v[:, keep].T
