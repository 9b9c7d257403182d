"""Packing constructions behind the minimax lower bounds.

Binary codes come from a greedy Varshamov-Gilbert construction; codewords
are lifted to sparse hypothesis matrices whose pairwise prediction
distances are large while their Kullback-Leibler divergences from the zero
matrix stay within budget.
"""

from dataclasses import dataclass
from math import ceil, isinf, log, sqrt

import numpy as np

from .errors import InvalidInputError, InvalidParameterError

__all__ = [
    "PackingDesign",
    "vg_packing",
    "hypothesis_set",
    "kl_budget",
    "psi_rate",
    "gamma_rank_regime",
    "hamming_distances",
]

EXHAUSTIVE_BITS = 20


@dataclass
class PackingDesign:
    n_bits: int
    min_dist: int
    codewords: np.ndarray
    s: int
    gamma: float
    nu: float
    hypotheses: list

    def to_dict(self):
        return {
            "n_bits": self.n_bits,
            "min_dist": self.min_dist,
            "codewords": self.codewords.astype(int).tolist(),
            "s": self.s,
            "gamma": self.gamma,
            "nu": self.nu,
        }


def hamming_distances(words):
    """Pairwise Hamming distance matrix of 0/1 rows."""
    w = np.asarray(words, dtype=np.int64)
    return w @ (1 - w).T + (1 - w) @ w.T


def _candidates(n_bits, rng):
    if n_bits <= EXHAUSTIVE_BITS:
        for idx in rng.permutation(2 ** n_bits):
            if idx:
                yield (int(idx) >> np.arange(n_bits)) & 1
        return
    # too many words to enumerate: draw uniformly at random, a bounded number of times
    for _ in range(1 << EXHAUSTIVE_BITS):
        yield rng.integers(0, 2, size=n_bits)


def vg_packing(n_bits, min_dist, target_card, seed=0):
    """Greedy binary code with pairwise Hamming distance at least ``min_dist``.

    The all-zero word comes first; remaining candidates are visited in a
    seeded random order and kept when far enough from every kept word.
    Stops at ``target_card`` words or when candidates run out.
    """
    if n_bits < 1:
        raise InvalidParameterError("n_bits must be positive")
    if not 1 <= min_dist <= n_bits:
        raise InvalidParameterError(f"min_dist must lie in [1, {n_bits}]")
    if target_card < 1:
        raise InvalidParameterError("target_card must be positive")
    rng = np.random.default_rng(seed)
    kept = np.zeros((min(target_card, 1 << 16), n_bits), dtype=np.int64)
    count = 1
    for cand in _candidates(n_bits, rng):
        if count >= target_card:
            break
        dist = np.count_nonzero(kept[:count] != cand, axis=1)
        if dist.min() >= min_dist:
            if count == kept.shape[0]:
                kept = np.vstack([kept, np.zeros_like(kept)])
            kept[count] = cand
            count += 1
    return kept[:count].astype(np.int8)


def hypothesis_set(m, t, n_obs, s, gamma, nu, seed=0, target_card=None, support=None):
    """Hypothesis matrices with entries in ``{0, gamma * nu / sqrt(N)}``.

    By default the support is the first ``s`` columns; a boolean ``support``
    mask (m x t) restricts it to an arbitrary index set instead. Codewords
    have length equal to the support size and minimum distance
    ``ceil(size / 8)``.
    """
    if not 1 <= s <= min(m, t):
        raise InvalidParameterError(f"s must lie in [1, {min(m, t)}]")
    if n_obs < 1 or not gamma > 0 or not nu > 0:
        raise InvalidParameterError("need n_obs >= 1, gamma > 0 and nu > 0")
    if support is None:
        support = np.zeros((m, t), dtype=bool)
        support[:, :s] = True
    else:
        support = np.asarray(support, dtype=bool)
        if support.shape != (m, t) or not support.any():
            raise InvalidInputError("support must be a nonempty m x t boolean mask")
    n_bits = int(support.sum())
    min_dist = ceil(n_bits / 8)
    if target_card is None:
        target_card = 2 ** min_dist
    words = vg_packing(n_bits, min_dist, target_card, seed)
    level = gamma * nu / sqrt(n_obs)
    # column-major fill so that column-supported codes read down each column
    idx = np.flatnonzero(support.T.ravel())
    hyps = []
    for w in words:
        flat = np.zeros(m * t)
        flat[idx] = level * w
        hyps.append(flat.reshape(t, m).T)
    return PackingDesign(n_bits, min_dist, words, s, float(gamma), float(nu), hyps)


def kl_budget(n_obs, sigma, pred_sq_list, card, alpha):
    """KL divergences ``N d^2 / (2 sigma^2)`` and the budget ``mean <= alpha log(card - 1)``."""
    if not sigma > 0:
        raise InvalidParameterError("sigma must be positive")
    if card < 2:
        raise InvalidParameterError("card must be at least 2")
    if not 0 < alpha < 1 / 8:
        raise InvalidParameterError("alpha must lie in (0, 1/8)")
    kl = np.asarray(pred_sq_list, dtype=np.float64) * n_obs / (2 * sigma ** 2)
    mean = float(kl.mean()) if kl.size else 0.0
    return kl, bool(mean <= alpha * log(card - 1))


def psi_rate(m, t, n_obs, r, delta_cap, p):
    """``min(r M / N, Delta^p (M/N)^(1 - p/2), Delta^2)`` with ``M = max(m, t)``."""
    if r < 1:
        raise InvalidParameterError("r must be at least 1")
    if not 0 < p <= 2:
        raise InvalidParameterError("p must lie in (0, 2]")
    if delta_cap < 0:
        raise InvalidParameterError("Delta must be nonnegative")
    ratio = max(m, t) / n_obs
    if isinf(delta_cap):
        return r * ratio
    return min(r * ratio, delta_cap ** p * ratio ** (1 - p / 2), delta_cap ** 2)


def gamma_rank_regime(alpha, sigma, delta_r=0.0):
    """Amplitude ``gamma`` with ``gamma^2 = alpha sigma^2 log 2 / (4 (1 + delta_r)^2)``."""
    if not 0 < alpha < 1 / 8:
        raise InvalidParameterError("alpha must lie in (0, 1/8)")
    return sqrt(alpha * sigma ** 2 * log(2) / (4 * (1 + delta_r) ** 2))

