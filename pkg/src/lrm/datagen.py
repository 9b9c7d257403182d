"""Synthetic ground truth, masks, noise and datasets for the trace regression model."""

from dataclasses import dataclass
from math import factorial

import numpy as np

from .densela import as_matrix, svd
from .errors import InvalidInputError, InvalidParameterError
from .sampling import SamplingOperator

__all__ = [
    "GroundTruth",
    "Gaussian",
    "BoundedBernstein",
    "Dataset",
    "SCENARIOS",
    "gen_ground_truth",
    "gen_masks",
    "gen_dataset",
]

SCENARIOS = ("usr", "cs", "multitask", "gaussian_dense")


@dataclass(frozen=True)
class GroundTruth:
    a_star: np.ndarray
    r: int
    spectral_scale: float


@dataclass(frozen=True)
class Gaussian:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParameterError("Gaussian noise needs sigma > 0")

    kind = "gaussian"

    def sample(self, rng, n):
        return self.sigma * rng.standard_normal(n)


@dataclass(frozen=True)
class BoundedBernstein:
    """Noise ``sigma * epsilon`` with Rademacher ``epsilon``.

    Its absolute moments are ``sigma**l``; construction checks
    ``sigma**l <= l!/2 * sigma**2 * h**(l-2)`` for l = 2..8.
    """

    sigma: float
    h: float

    kind = "bernstein"

    def __post_init__(self):
        if not self.sigma > 0 or not self.h > 0:
            raise InvalidParameterError("Bernstein noise needs sigma > 0 and h > 0")
        if self.h < self.sigma:
            raise InvalidParameterError("Rademacher noise requires h >= sigma")
        for moment in range(2, 9):
            bound = 0.5 * factorial(moment) * self.sigma ** 2 * self.h ** (moment - 2)
            if self.sigma ** moment > bound * (1 + 1e-12):
                raise InvalidParameterError(f"Bernstein moment condition fails at l={moment}")

    def sample(self, rng, n):
        return self.sigma * (2.0 * rng.integers(0, 2, size=n) - 1.0)


@dataclass
class Dataset:
    """Observations ``y_i = tr(X_i' A*) + xi_i`` together with their design.

    ``noise`` is None for noiseless data.
    """

    op: SamplingOperator
    y: np.ndarray
    truth: GroundTruth = None
    noise: object = None
    seed: int = 0
    scenario: str = "custom"
    n_per_task: int = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.shape != (self.op.n,):
            raise InvalidInputError(f"y must have length N={self.op.n}")
        if not np.all(np.isfinite(self.y)):
            raise InvalidInputError("responses must be finite")
        if self.truth is not None and self.truth.a_star.shape != (self.op.m, self.op.t):
            raise InvalidInputError("ground truth shape does not match the masks")

    @property
    def m(self):
        return self.op.m

    @property
    def t(self):
        return self.op.t

    @property
    def n(self):
        return self.op.n

    @property
    def sigma(self):
        return 0.0 if self.noise is None else self.noise.sigma

    @property
    def xi(self):
        """Realized noise vector (requires ground truth)."""
        if self.truth is None:
            raise InvalidInputError("dataset carries no ground truth")
        return self.y - self.op.traces(self.truth.a_star)


def gen_ground_truth(m, t, r, spectral_scale=1.0, seed=0):
    """Rank-r matrix ``G1 @ G2.T`` with Gaussian factors, rescaled to ``s_1 = spectral_scale``."""
    if not 0 <= r <= min(m, t):
        raise InvalidParameterError(f"rank {r} outside [0, {min(m, t)}]")
    if r == 0:
        return GroundTruth(np.zeros((m, t)), 0, float(spectral_scale))
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, r)) @ rng.standard_normal((t, r)).T
    a *= spectral_scale / svd(a, method="lapack").singular_values[0]
    return GroundTruth(a, int(r), float(spectral_scale))


def gen_masks(scenario, m, t, n_or_N, seed=0):
    """Draw the masks for a scenario.

    ``n_or_N`` is the number of observations N, except for ``"multitask"``
    where it is the per-task count n (so N = n * T).
    """
    rng = np.random.default_rng(seed)
    if scenario == "usr":
        cells = rng.integers(0, m * t, size=n_or_N)
        return SamplingOperator.from_points(m, t, cells // t, cells % t)
    if scenario == "cs":
        if n_or_N > m * t:
            raise InvalidParameterError(f"CS sampling needs N <= mT = {m * t}")
        cells = rng.choice(m * t, size=n_or_N, replace=False)
        return SamplingOperator.from_points(m, t, cells // t, cells % t)
    if scenario == "multitask":
        if n_or_N < 1:
            raise InvalidParameterError("multitask needs n >= 1")
        tasks = np.repeat(np.arange(t), n_or_N)
        return SamplingOperator.from_columns(m, t, tasks, rng.standard_normal((t * n_or_N, m)))
    if scenario == "gaussian_dense":
        return SamplingOperator.from_dense(m, t, rng.standard_normal((n_or_N, m, t)))
    raise InvalidParameterError(f"unknown scenario {scenario!r}")


def gen_dataset(truth, op, noise, seed=0, scenario="custom", n_per_task=None):
    """Responses from the trace regression model; ``noise=None`` gives exact traces."""
    a_star = as_matrix(truth.a_star)
    if a_star.shape != (op.m, op.t):
        raise InvalidInputError("ground truth shape does not match the masks")
    y = op.traces(a_star)
    if noise is not None:
        y = y + noise.sample(np.random.default_rng(seed), op.n)
    return Dataset(op, y, truth, noise, int(seed), scenario, n_per_task)
