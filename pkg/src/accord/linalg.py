"""Dense and sparse matrix primitives shared by the solver and the generators.

Sparse square matrices are held as :class:`scipy.sparse.csr_array` with
sorted column indices and an explicitly stored diagonal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

#: Largest ``p`` for which a dense ``p x p`` sample covariance is materialized.
DENSE_CAP = 4096

SparseSquare = sp.csr_array


class DenseTooLarge(MemoryError):
    """Raised when a dense ``p x p`` object is requested above the cap."""


@dataclass
class DenseData:
    """An ``n x p`` sample matrix, one row per observation.

    ``spectral_bound`` caches the largest eigenvalue of ``X.T @ X / n`` once
    it has been computed by :func:`spectral_bound`.
    """

    values: np.ndarray
    centered: bool = False
    spectral_bound: float | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"data must be 2-D, got shape {self.values.shape}")
        n, p = self.values.shape
        if n < 1 or p < 1:
            raise ValueError(f"data must have n >= 1 and p >= 1, got {n}x{p}")
        _check_finite(self.values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass
class DenseSquare:
    values: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def _check_finite(a: np.ndarray) -> None:
    bad = ~np.isfinite(a)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(f"non-finite entry {a[i, j]!r} at row {i}, column {j}")


def center_columns(raw) -> DenseData:
    """Subtract the column means of ``raw`` and wrap the result."""
    x = np.array(raw, dtype=np.float64, copy=True)
    if x.ndim != 2:
        raise ValueError(f"data must be 2-D, got shape {x.shape}")
    _check_finite(x)
    x -= x.mean(axis=0, keepdims=True)
    return DenseData(x, centered=True)


def gram(data: DenseData, dense_cap: int = DENSE_CAP) -> DenseSquare:
    """Return ``S = X.T @ X / n`` as a dense, exactly symmetric matrix."""
    p = data.p
    if p > dense_cap:
        raise DenseTooLarge(
            f"p={p} exceeds dense_cap={dense_cap}; use the matrix-free path")
    x = data.values
    s = (x.T @ x) / data.n
    # BLAS may round the two triangles differently
    upper = np.triu(s)
    s = upper + np.triu(s, 1).T
    return DenseSquare(s)


def spectral_bound(data: DenseData, tol: float = 1e-6, max_iter: int = 1000,
                   seed: int = 0) -> float:
    """Largest eigenvalue of ``X.T @ X / n`` by matrix-free power iteration.

    The iteration starts from the normalized all-ones vector. A second run
    from a seeded random vector guards against a start vector that is
    orthogonal to the leading eigenvector; the larger estimate wins. The
    result is inflated by ``1 + tol`` so that ``1/L`` stays a safe step.

    The value is cached on ``data.spectral_bound``.
    """
    x = data.values
    n, p = x.shape
    if not np.any(x):
        logger.warning("spectral bound of an all-zero data matrix is 0")
        data.spectral_bound = 0.0
        return 0.0

    starts = [np.ones(p), np.random.default_rng(seed).standard_normal(p)]
    best = 0.0
    for v in starts:
        v = v / np.linalg.norm(v)
        est = 0.0
        for _ in range(max_iter):
            xv = x @ v
            new = float(xv @ xv) / n
            w = x.T @ xv
            norm = np.linalg.norm(w)
            if norm == 0.0:
                break
            v = w / norm
            if abs(new - est) <= tol * new:
                est = new
                break
            est = new
        best = max(best, est)
    bound = best * (1.0 + tol)
    data.spectral_bound = bound
    return bound


def spdm(omega, dense: np.ndarray) -> np.ndarray:
    """Sparse times dense product ``omega @ dense``."""
    dense = np.asarray(dense)
    if omega.shape[1] != dense.shape[0]:
        raise ValueError(
            f"dimension mismatch: {omega.shape} @ {dense.shape}")
    return np.asarray(omega @ dense)


def as_sparse_square(a, keep_diagonal: bool = True) -> sp.csr_array:
    """Convert ``a`` to canonical CSR: sorted indices, no explicit
    off-diagonal zeros, diagonal stored."""
    m = sp.csr_array(a, dtype=np.float64)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got {m.shape}")
    m.sum_duplicates()
    if keep_diagonal:
        coo = m.tocoo()
        keep = (coo.data != 0) | (coo.row == coo.col)
        p = m.shape[0]
        diag = m.diagonal()
        rows = np.concatenate([coo.row[keep & (coo.row != coo.col)], np.arange(p)])
        cols = np.concatenate([coo.col[keep & (coo.row != coo.col)], np.arange(p)])
        vals = np.concatenate([coo.data[keep & (coo.row != coo.col)], diag])
        m = sp.csr_array((vals, (rows, cols)), shape=(p, p))
    else:
        m.eliminate_zeros()
    m.sort_indices()
    return m


def offdiag_support(omega) -> sp.csr_array:
    """Boolean CSR pattern of the nonzero off-diagonal entries."""
    coo = sp.coo_array(omega)
    keep = (coo.data != 0) & (coo.row != coo.col)
    pattern = sp.csr_array(
        (np.ones(keep.sum(), dtype=bool), (coo.row[keep], coo.col[keep])),
        shape=omega.shape)
    pattern.sort_indices()
    return pattern


def nnz_offdiag(omega) -> int:
    coo = sp.coo_array(omega)
    return int(np.count_nonzero((coo.data != 0) & (coo.row != coo.col)))
