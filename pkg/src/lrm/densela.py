"""Dense linear algebra: SVD, Schatten quasi-norms and the rank split.

Matrices are plain 2-D ``float64`` numpy arrays. The reference SVD is a
one-sided (Hestenes) Jacobi method with round-robin pair ordering so that a
whole round of disjoint rotations is applied in one vectorized step.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError

__all__ = [
    "SvdFactors",
    "RankSplit",
    "as_matrix",
    "svd",
    "singular_values",
    "schatten",
    "rank_split",
    "numerical_rank",
]

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 80
CLAMP_REL = 1e-13
RANK_TOL = 1e-9


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``a = u @ diag(singular_values) @ v.T`` with k = min(m, T)."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        return (self.u * self.singular_values) @ self.v.T


@dataclass(frozen=True)
class RankSplit:
    b1: np.ndarray
    b2: np.ndarray


def as_matrix(a, name="matrix"):
    """Validate and convert ``a`` to a finite 2-D float64 array."""
    try:
        arr = np.asarray(a, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name}: not a numeric array ({exc})") from None
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name}: expected a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name}: entries must be finite")
    return arr


def _round_robin(n):
    """Disjoint pair schedules covering every pair once (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        left = players[: n // 2]
        right = players[n // 2:][::-1]
        rounds.append((np.array(left), np.array(right)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _complete_basis(q, k):
    """Extend the orthonormal columns of ``q`` (some may be zero) to k columns."""
    m = q.shape[0]
    norms = np.linalg.norm(q, axis=0)
    good = norms > 0
    out = q.copy()
    if good.all():
        return out
    basis, _ = np.linalg.qr(np.hstack([q[:, good], np.eye(m)]))
    fill = basis[:, good.sum():]
    out[:, ~good] = fill[:, : (~good).sum()]
    return out


def _jacobi(a):
    """One-sided Jacobi on a tall matrix (m >= n)."""
    m, n = a.shape
    pad = n % 2
    w = np.hstack([a, np.zeros((m, pad))]) if pad else a.copy()
    nn = n + pad
    v = np.eye(nn)
    rounds = _round_robin(nn) if nn > 1 else []
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p, q in rounds:
            wp, wq = w[:, p], w[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            active = np.abs(gamma) > JACOBI_TOL * np.sqrt(alpha * beta)
            if not active.any():
                continue
            rotated = True
            g = np.where(active, gamma, 1.0)
            with np.errstate(over="ignore"):
                # zeta = inf gives t = 0, the correct limiting rotation
                zeta = (beta - alpha) / (2.0 * g)
                t = np.sign(zeta) / (np.abs(zeta) + np.hypot(1.0, zeta))
            t = np.where(zeta == 0.0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            w[:, p], w[:, q] = c * wp - s * wq, s * wp + c * wq
            vp, vq = v[:, p], v[:, q]
            v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            break
    w, v = w[:, :n], v[:n, :n]
    sv = np.linalg.norm(w, axis=0)
    order = np.argsort(-sv, kind="stable")
    sv, w, v = sv[order], w[:, order], v[:, order]
    u = np.zeros_like(w)
    # rounding residue of a rank-deficient input has no meaningful direction
    nz = sv > 4 * np.finfo(float).eps * max(m, n) * (sv[0] if n else 0.0)
    u[:, nz] = w[:, nz] / sv[nz]
    return _complete_basis(u, n), sv, v


def svd(a, method="jacobi"):
    """Thin singular value decomposition.

    Parameters
    ----------
    a : array_like
        Finite m x T matrix.
    method : {"jacobi", "lapack"}
        ``"jacobi"`` is the one-sided Jacobi reference implementation;
        ``"lapack"`` delegates to ``numpy.linalg.svd`` and is used on hot
        solver paths.

    Returns
    -------
    SvdFactors
    """
    a = as_matrix(a)
    if method == "lapack":
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        return SvdFactors(u, s, vt.T)
    if method != "jacobi":
        raise InvalidParameterError(f"unknown svd method {method!r}")
    if a.shape[0] >= a.shape[1]:
        u, s, v = _jacobi(a)
    else:
        v, s, u = _jacobi(a.T)
    return SvdFactors(u, s, v)


def singular_values(a, method="lapack"):
    """Singular values, descending, with entries below 1e-13 * s_1 set to 0."""
    a = as_matrix(a)
    if method == "lapack":
        s = np.linalg.svd(a, compute_uv=False)
    else:
        s = svd(a, method=method).singular_values
    if s.size and s[0] > 0:
        s = np.where(s < CLAMP_REL * s[0], 0.0, s)
    return s


def schatten(a, p, method="lapack"):
    """Schatten quasi-norm ``(sum s_j**p)**(1/p)``; ``p=np.inf`` is the spectral norm."""
    if not p > 0:
        raise InvalidParameterError(f"Schatten index must be positive, got {p}")
    s = singular_values(a, method=method)
    if np.isinf(p):
        return float(s[0])
    if p == 2:
        return float(np.linalg.norm(as_matrix(a)))
    return float(np.sum(s ** p) ** (1.0 / p))


def schatten_pow(a, p, method="lapack"):
    """``schatten(a, p) ** p`` computed without the outer root."""
    if not 0 < p < np.inf:
        raise InvalidParameterError(f"Schatten index must be finite and positive, got {p}")
    s = singular_values(a, method=method)
    return float(np.sum(s[s > 0] ** p))


def numerical_rank(a, tol=RANK_TOL):
    """Number of singular values strictly above ``tol * s_1``."""
    if tol < 0:
        raise InvalidParameterError("tol must be nonnegative")
    s = np.linalg.svd(as_matrix(a), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def rank_split(a, b):
    """Split ``b = b1 + b2`` around the row and column spaces of ``a``.

    ``b2`` is the compression of ``b`` onto the orthogonal complements of the
    column and row spaces of ``a``; ``b1`` carries everything else and has
    rank at most ``2 * rank(a)``.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch {a.shape} vs {b.shape}")
    f = svd(a)
    r = numerical_rank(a)
    u, v = f.u[:, :r], f.v[:, :r]
    m, t = a.shape
    pu = np.eye(m) - u @ u.T
    pv = np.eye(t) - v @ v.T
    b2 = pu @ b @ pv
    return RankSplit(b - b2, b2)
