"""Masks, the sampling operator and its diagnostics.

The sampling operator maps ``A`` to ``(tr(X_1' A), ..., tr(X_N' A)) / sqrt(N)``.
Homogeneous mask collections are stored in compact form (index arrays for
point masks, a predictor table for column masks, a flattened design for
dense masks) so that desk-scale Monte Carlo runs stay fast.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .densela import as_matrix
from .errors import InvalidInputError, InvalidParameterError

__all__ = [
    "Point",
    "Column",
    "Dense",
    "SamplingOperator",
    "OperatorReport",
    "RIEstimate",
    "apply",
    "adjoint",
    "operator_norm",
    "lipschitz",
    "phi_max1",
    "operator_report",
    "ri_estimate",
    "dispersion_kappa",
    "gram_spectra",
    "design_constants",
    "gram_max_cross",
]

# Gram matrices are cached only below this many unknowns (mT).
GRAM_LIMIT = 4096


@dataclass(frozen=True)
class Point:
    row: int
    col: int


@dataclass(frozen=True)
class Column:
    task: int
    x: tuple


@dataclass(frozen=True)
class Dense:
    data: np.ndarray


@dataclass(frozen=True)
class OperatorReport:
    phi_max1: float
    op_norm: float
    c0_estimate: float


@dataclass(frozen=True)
class RIEstimate:
    r: int
    nu: float
    delta_hat: float
    n_samples: int


class SamplingOperator:
    """Linear map ``A -> (tr(X_i' A))_i / sqrt(N)`` for a list of masks.

    Build with :meth:`from_masks` for arbitrary mask lists, or with the
    ``from_points`` / ``from_columns`` / ``from_dense`` constructors for the
    compact homogeneous forms.
    """

    def __init__(self, m, t, kind, **arrays):
        if m < 1 or t < 1:
            raise InvalidInputError("dimensions must be positive")
        self.m, self.t, self.kind = int(m), int(t), kind
        if kind == "point":
            self.rows = np.asarray(arrays["rows"], dtype=np.int64)
            self.cols = np.asarray(arrays["cols"], dtype=np.int64)
            n = self.rows.size
            if self.cols.size != n:
                raise InvalidInputError("rows and cols differ in length")
            if n and (self.rows.min() < 0 or self.rows.max() >= m
                      or self.cols.min() < 0 or self.cols.max() >= t):
                raise InvalidInputError("point mask index out of range")
        elif kind == "column":
            self.tasks = np.asarray(arrays["tasks"], dtype=np.int64)
            self.x = np.asarray(arrays["x"], dtype=np.float64).reshape(-1, m)
            n = self.tasks.size
            if self.x.shape[0] != n:
                raise InvalidInputError("tasks and predictors differ in length")
            if n and (self.tasks.min() < 0 or self.tasks.max() >= t):
                raise InvalidInputError("column mask task out of range")
            if not np.all(np.isfinite(self.x)):
                raise InvalidInputError("column mask predictors must be finite")
        elif kind == "dense":
            self.design = np.asarray(arrays["design"], dtype=np.float64).reshape(-1, m * t)
            n = self.design.shape[0]
            if not np.all(np.isfinite(self.design)):
                raise InvalidInputError("dense masks must be finite")
        else:
            raise InvalidInputError(f"unknown operator kind {kind!r}")
        if n < 1:
            raise InvalidInputError("at least one mask is required")
        self.n = n
        self._gram = None
        self._lip = None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_points(cls, m, t, rows, cols):
        return cls(m, t, "point", rows=rows, cols=cols)

    @classmethod
    def from_columns(cls, m, t, tasks, x):
        return cls(m, t, "column", tasks=tasks, x=x)

    @classmethod
    def from_dense(cls, m, t, stack):
        stack = np.asarray(stack, dtype=np.float64)
        if stack.ndim != 3 or stack.shape[1:] != (m, t):
            raise InvalidInputError(f"dense masks must have shape (N, {m}, {t})")
        return cls(m, t, "dense", design=stack.reshape(stack.shape[0], m * t))

    @classmethod
    def from_masks(cls, m, t, masks):
        masks = list(masks)
        if not masks:
            raise InvalidInputError("at least one mask is required")
        kinds = {type(k) for k in masks}
        if kinds == {Point}:
            return cls.from_points(m, t, [k.row for k in masks], [k.col for k in masks])
        if kinds == {Column}:
            xs = [np.asarray(k.x, dtype=np.float64) for k in masks]
            if any(x.shape != (m,) for x in xs):
                raise InvalidInputError(f"column mask predictors must have length {m}")
            return cls.from_columns(m, t, [k.task for k in masks], np.vstack(xs))
        stack = np.zeros((len(masks), m, t))
        for i, k in enumerate(masks):
            stack[i] = _mask_matrix(k, m, t)
        return cls.from_dense(m, t, stack)

    @property
    def masks(self):
        if self.kind == "point":
            return [Point(int(r), int(c)) for r, c in zip(self.rows, self.cols)]
        if self.kind == "column":
            return [Column(int(k), tuple(float(v) for v in x)) for k, x in zip(self.tasks, self.x)]
        return [Dense(d.reshape(self.m, self.t)) for d in self.design]

    def dense_stack(self):
        """All masks as an (N, m, T) array."""
        if self.kind == "dense":
            return self.design.reshape(self.n, self.m, self.t)
        out = np.zeros((self.n, self.m, self.t))
        idx = np.arange(self.n)
        if self.kind == "point":
            out[idx, self.rows, self.cols] = 1.0
        else:
            out[idx, :, self.tasks] = self.x
        return out

    # -- linear maps --------------------------------------------------------

    def _check(self, a):
        a = as_matrix(a)
        if a.shape != (self.m, self.t):
            raise InvalidInputError(f"expected a {self.m}x{self.t} matrix, got {a.shape}")
        return a

    def traces(self, a):
        """Unscaled functionals ``tr(X_i' a)``."""
        a = self._check(a)
        if self.kind == "point":
            return a[self.rows, self.cols]
        if self.kind == "column":
            return np.einsum("ij,ij->i", self.x, a[:, self.tasks].T)
        return self.design @ a.ravel()

    def weighted_sum(self, z):
        """Unscaled ``sum_i z_i X_i``."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.n,):
            raise InvalidInputError(f"expected a vector of length {self.n}, got shape {z.shape}")
        if self.kind == "point":
            flat = np.bincount(self.rows * self.t + self.cols, weights=z,
                               minlength=self.m * self.t)
            return flat.reshape(self.m, self.t)
        if self.kind == "column":
            out = np.zeros((self.t, self.m))
            np.add.at(out, self.tasks, z[:, None] * self.x)
            return out.T
        return (z @ self.design).reshape(self.m, self.t)

    def apply(self, a):
        return self.traces(a) / np.sqrt(self.n)

    def adjoint(self, z):
        return self.weighted_sum(z) / np.sqrt(self.n)

    def gram(self):
        """Normalized Gram ``N^-1 sum vec(X_i) vec(X_i)'`` or None when too large."""
        if self._gram is None and self.m * self.t <= GRAM_LIMIT:
            if self.kind == "point":
                counts = np.bincount(self.rows * self.t + self.cols, minlength=self.m * self.t)
                self._gram = np.diag(counts / self.n)
            else:
                d = self.design if self.kind == "dense" else self.dense_stack().reshape(self.n, -1)
                self._gram = (d.T @ d) / self.n
        return self._gram

    def normal(self, a):
        """``adjoint(apply(a))``, through the cached Gram when available."""
        a = self._check(a)
        if self.kind == "point":
            counts = np.bincount(self.rows * self.t + self.cols, minlength=self.m * self.t)
            return (counts.reshape(self.m, self.t) / self.n) * a
        if self.kind == "column":
            return self._task_second_moments_apply(a)
        g = self.gram()
        if g is not None:
            return (g @ a.ravel()).reshape(self.m, self.t)
        return self.adjoint(self.apply(a))

    def task_second_moments(self):
        """Per-task ``N^-1 sum x x'`` for column masks, shape (T, m, m)."""
        out = np.zeros((self.t, self.m, self.m))
        for k in range(self.t):
            xs = self.x[self.tasks == k]
            out[k] = xs.T @ xs
        return out / self.n

    def _task_second_moments_apply(self, a):
        if not hasattr(self, "_s_t"):
            self._s_t = self.task_second_moments()
        return np.einsum("tij,jt->it", self._s_t, a)

    # -- rank-one quadratic forms used by phi_max1 --------------------------

    def left_form(self, v):
        """``N^-1 sum (X_i v)(X_i v)'`` (m x m) for fixed right factor ``v``."""
        if self.kind == "point":
            w = np.bincount(self.rows, weights=v[self.cols] ** 2, minlength=self.m)
            return np.diag(w / self.n)
        if self.kind == "column":
            if not hasattr(self, "_s_t"):
                self._s_t = self.task_second_moments()
            return np.einsum("t,tij->ij", v ** 2, self._s_t)
        g = self.gram()
        if g is not None:
            m, t = self.m, self.t
            w = (g.reshape(m * t * m, t) @ v).reshape(m, t, m)
            return np.tensordot(v, w, axes=([0], [1]))
        w = (self.design.reshape(self.n * self.m, self.t) @ v).reshape(self.n, self.m)
        return w.T @ w / self.n

    def right_form(self, u):
        """``N^-1 sum (X_i' u)(X_i' u)'`` (T x T) for fixed left factor ``u``."""
        if self.kind == "point":
            w = np.bincount(self.cols, weights=u[self.rows] ** 2, minlength=self.t)
            return np.diag(w / self.n)
        if self.kind == "column":
            proj = self.x @ u
            w = np.bincount(self.tasks, weights=proj ** 2, minlength=self.t)
            return np.diag(w / self.n)
        g = self.gram()
        if g is not None:
            m, t = self.m, self.t
            w = (u @ g.reshape(m, t * m * t)).reshape(t, m, t)
            return np.tensordot(u, w, axes=([0], [1]))
        w = np.einsum("imt,m->it", self.design.reshape(self.n, self.m, self.t), u)
        return w.T @ w / self.n


def _mask_matrix(mask, m, t):
    out = np.zeros((m, t))
    if isinstance(mask, Point):
        if not (0 <= mask.row < m and 0 <= mask.col < t):
            raise InvalidInputError("point mask index out of range")
        out[mask.row, mask.col] = 1.0
    elif isinstance(mask, Column):
        x = np.asarray(mask.x, dtype=np.float64)
        if not 0 <= mask.task < t or x.shape != (m,):
            raise InvalidInputError("column mask incompatible with dimensions")
        out[:, mask.task] = x
    elif isinstance(mask, Dense):
        d = as_matrix(mask.data, "dense mask")
        if d.shape != (m, t):
            raise InvalidInputError("dense mask has wrong shape")
        out[:] = d
    else:
        raise InvalidInputError(f"not a mask: {mask!r}")
    return out


def apply(op, a):
    """Sampling operator ``L(a)``, a vector of length N."""
    return op.apply(a)


def adjoint(op, z):
    """Adjoint ``L*(z) = N^-1/2 sum z_i X_i``."""
    return op.adjoint(z)


def operator_norm(op, tol=1e-10, max_iter=10000, seed=0):
    """Operator norm of ``L`` (Frobenius to Euclidean) by power iteration on ``L*L``."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((op.m, op.t))
    a /= np.linalg.norm(a)
    prev = 0.0
    for _ in range(max_iter):
        b = op.normal(a)
        lam = float(np.sum(a * b))
        nb = np.linalg.norm(b)
        if nb == 0.0:
            return 0.0
        a = b / nb
        if abs(lam - prev) <= tol * abs(lam):
            break
        prev = lam
    return float(np.sqrt(max(lam, 0.0)))


def lipschitz(op):
    """Exact largest eigenvalue of ``L*L`` (the squared operator norm).

    Used to set solver step sizes, where an underestimate would break
    monotone descent.
    """
    if op._lip is not None:
        return op._lip
    if op.kind == "point":
        counts = np.bincount(op.rows * op.t + op.cols, minlength=op.m * op.t)
        lip = counts.max() / op.n
    elif op.kind == "column":
        s_t = op.task_second_moments()
        lip = max(np.linalg.eigvalsh(s)[-1] for s in s_t)
    else:
        g = op.gram()
        if g is not None:
            n = g.shape[0]
            if n <= 400:
                lip = np.linalg.eigvalsh(g)[-1]
            else:
                lip = scipy.sparse.linalg.eigsh(g, k=1, which="LA", tol=0,
                                                v0=np.ones(n), return_eigenvectors=False)[0]
        else:
            lin = scipy.sparse.linalg.LinearOperator(
                (op.m * op.t, op.m * op.t),
                matvec=lambda x: op.adjoint(op.apply(x.reshape(op.m, op.t))).ravel(),
                dtype=np.float64)
            lip = scipy.sparse.linalg.eigsh(lin, k=1, which="LA", tol=0,
                                            v0=np.ones(op.m * op.t), return_eigenvectors=False)[0]
    op._lip = float(lip)
    return op._lip


def _top_eig(q):
    w, vecs = np.linalg.eigh(q)
    return vecs[:, -1], w[-1]


def phi_max1(op, restarts=8, seed=0, tol=1e-12, max_iter=1000):
    """Maximal rank-one restricted eigenvalue, by alternating maximization.

    Returns ``sqrt(max (1/N) sum (u' X_i v)^2)`` over unit ``u, v`` found
    from ``restarts`` random starting vectors ``v``; every value returned is
    attained, so it never exceeds the true supremum.
    """
    if restarts < 1:
        raise InvalidParameterError("restarts must be at least 1")
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(restarts):
        v = rng.standard_normal(op.t)
        v /= np.linalg.norm(v)
        val = 0.0
        for _ in range(max_iter):
            u, _ = _top_eig(op.left_form(v))
            v, new = _top_eig(op.right_form(u))
            if new - val <= tol * max(new, 1e-300):
                val = max(val, new)
                break
            val = new
        best = max(best, val)
    return float(np.sqrt(max(best, 0.0)))


def operator_report(op, restarts=8, seed=0):
    norm = operator_norm(op)
    return OperatorReport(phi_max1(op, restarts=restarts, seed=seed), norm, norm ** 2)


def ri_estimate(op, r, nu, n_samples, seed=0, extra=()):
    """Monte Carlo lower bound on the RI(r, nu) constant.

    Samples ``n_samples`` random rank-r matrices (Gaussian factor products at
    unit Frobenius norm) plus any matrices in ``extra`` and returns the
    largest deviation ``|nu * |L(A)|_2 / ||A||_F - 1|``.
    """
    if not 1 <= r <= min(op.m, op.t):
        raise InvalidParameterError(f"rank must lie in [1, {min(op.m, op.t)}]")
    if not nu > 0:
        raise InvalidParameterError("nu must be positive")
    rng = np.random.default_rng(seed)
    worst = 0.0
    tests = [rng.standard_normal((op.m, r)) @ rng.standard_normal((op.t, r)).T
             for _ in range(n_samples)]
    tests.extend(as_matrix(e) for e in extra)
    for a in tests:
        nrm = np.linalg.norm(a)
        if nrm == 0:
            continue
        dev = abs(nu * np.linalg.norm(op.apply(a / nrm)) - 1.0)
        worst = max(worst, dev)
    return RIEstimate(r, float(nu), float(worst), len(tests))


def dispersion_kappa(op, r):
    """Largest kappa in (0, 1] with ``kappa * max(m, T) * r + 1 <= c``.

    ``c`` is the number of distinct observed cells in the best choice of r
    columns or r rows (the r most observed lines). Returns 0 when no such
    kappa exists.
    """
    if op.kind != "point":
        raise InvalidInputError("dispersion condition needs point masks")
    if not 1 <= r <= min(op.m, op.t):
        raise InvalidParameterError(f"rank must lie in [1, {min(op.m, op.t)}]")
    cells = np.unique(op.rows * op.t + op.cols)
    col_counts = np.sort(np.bincount(cells % op.t, minlength=op.t))[::-1]
    row_counts = np.sort(np.bincount(cells // op.t, minlength=op.m))[::-1]
    c = max(col_counts[:r].sum(), row_counts[:r].sum())
    big_m = max(op.m, op.t)
    kappa = min(1.0, (c - 1) / (big_m * r))
    return float(kappa) if kappa > 0 else 0.0


def gram_spectra(op, n_per_task):
    """Eigenvalue range ``(min, max)`` of each task Gram matrix ``n^-1 sum x x'``."""
    if op.kind != "column":
        raise InvalidInputError("Gram spectra need column masks")
    out = []
    for k in range(op.t):
        xs = op.x[op.tasks == k]
        if xs.shape[0] != n_per_task:
            raise InvalidInputError(f"task {k} has {xs.shape[0]} masks, expected {n_per_task}")
        s = scipy.linalg.svd(xs, compute_uv=False)
        eig = np.zeros(op.m)
        eig[: s.size] = s ** 2 / n_per_task
        out.append((float(eig.min()), float(eig.max())))
    return out


def design_constants(op):
    """Row/column design constants ``(s_row, h_row, s_col, h_col)``.

    ``s_row**2 = max_j N^-1 sum_i |X_i(j,.)|^2`` and ``h_row = max |X_i(j,.)|``;
    the column versions are analogous.
    """
    if op.kind == "point":
        rc = np.bincount(op.rows, minlength=op.m)
        cc = np.bincount(op.cols, minlength=op.t)
        return (float(np.sqrt(rc.max() / op.n)), 1.0, float(np.sqrt(cc.max() / op.n)), 1.0)
    if op.kind == "column":
        sq = op.x ** 2
        s_row = np.sqrt(sq.sum(axis=0).max() / op.n)
        h_row = np.abs(op.x).max()
        col_sq = np.bincount(op.tasks, weights=sq.sum(axis=1), minlength=op.t)
        s_col = np.sqrt(col_sq.max() / op.n)
        h_col = np.sqrt(sq.sum(axis=1).max())
        return (float(s_row), float(h_row), float(s_col), float(h_col))
    stack = op.dense_stack()
    row_sq = np.einsum("imt,imt->im", stack, stack)
    col_sq = np.einsum("imt,imt->it", stack, stack)
    return (float(np.sqrt(row_sq.sum(axis=0).max() / op.n)), float(np.sqrt(row_sq.max())),
            float(np.sqrt(col_sq.sum(axis=0).max() / op.n)), float(np.sqrt(col_sq.max())))


def gram_max_cross(op):
    """``max(||sum X_i' X_i||^(1/2), ||sum X_i X_i'||^(1/2))`` in spectral norm."""
    if op.kind == "point":
        return float(np.sqrt(max(np.bincount(op.rows).max(), np.bincount(op.cols).max())))
    if op.kind == "column":
        per_task = np.bincount(op.tasks, weights=np.sum(op.x ** 2, axis=1), minlength=op.t)
        xx = np.linalg.eigvalsh(op.x.T @ op.x)[-1]
        return float(np.sqrt(max(per_task.max(), xx)))
    stack = op.dense_stack()
    xtx = np.einsum("ima,imb->ab", stack, stack)
    xxt = np.einsum("iak,ibk->ab", stack, stack)
    return float(np.sqrt(max(np.linalg.eigvalsh(xtx)[-1], np.linalg.eigvalsh(xxt)[-1])))
