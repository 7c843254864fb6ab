"""Regularization paths, extended pseudo-BIC scoring and the debiasing refit."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import DENSE_CAP, DenseData, nnz_offdiag, offdiag_support
from .solver import FitResult, Masked, SolverConfig, Uniform, smooth_loss, solve

logger = logging.getLogger(__name__)


def lambda_max(data: DenseData, dense_cap: int = DENSE_CAP,
               block_rows: int | None = None) -> float:
    """Largest off-diagonal ``|S_ij|``, accumulated over row blocks of ``S``."""
    x = data.values
    p = data.p
    block = block_rows or max(1, min(p, dense_cap, (1 << 22) // p))
    best = 0.0
    for r0 in range(0, p, block):
        r1 = min(r0 + block, p)
        s = (x[:, r0:r1].T @ x) / data.n
        rows = np.arange(r1 - r0)
        s[rows, rows + r0] = 0.0
        best = max(best, float(np.abs(s).max()))
    return best


def lambda_grid(data: DenseData, count: int = 30, ratio: float = 0.01,
                lam_max: float | None = None) -> np.ndarray:
    """``count`` log-spaced values from ``lambda_max`` down to ``lambda_max * ratio``."""
    if count < 2:
        raise ValueError(f"count must be at least 2, got {count}")
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    top = lambda_max(data) if lam_max is None else lam_max
    if top <= 0:
        raise ValueError("all off-diagonal sample covariances are zero")
    return np.geomspace(top, top * ratio, count)


def epbic(fit: FitResult, data: DenseData, gamma: float = 0.5) -> float:
    """Extended pseudo-BIC of a fitted ``Omega``.

    ``2n * loss + k log n + 4 gamma k log p`` with ``k`` the number of
    nonzero off-diagonal entries of the (asymmetric) estimate. ``gamma=0``
    gives the plain pseudo-BIC.
    """
    if not 0 <= gamma <= 1:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    return _score(smooth_loss(fit.omega, data), nnz_offdiag(fit.omega),
                  data.n, data.p, gamma)


def _score(loss, k, n, p, gamma):
    return 2 * n * loss + k * math.log(n) + 4 * gamma * k * math.log(p)


@dataclass
class PathResult:
    lambdas: np.ndarray
    fits: list[FitResult]
    losses: np.ndarray
    epbic_scores: np.ndarray
    gamma: float
    selected_index: int
    n: int
    p: int

    @property
    def selected(self) -> FitResult:
        return self.fits[self.selected_index]

    @property
    def nnz(self) -> np.ndarray:
        return np.array([nnz_offdiag(f.omega) for f in self.fits])

    def scores(self, gamma: float) -> np.ndarray:
        return np.array([_score(loss, k, self.n, self.p, gamma)
                         for loss, k in zip(self.losses, self.nnz)])

    def select(self, gamma: float) -> int:
        """Index minimizing the score for ``gamma`` among converged fits;
        ties go to the larger penalty."""
        return _argmin_converged(self.scores(gamma), self.fits)

    def report(self) -> list[dict]:
        return [
            {
                "lambda": float(lam),
                "nnz_offdiag": int(k),
                "objective": f.objective,
                "epbic": float(s),
                "converged": bool(f.converged),
                "kkt_residual": float(f.kkt_residual),
            }
            for lam, k, f, s in zip(self.lambdas, self.nnz, self.fits, self.epbic_scores)
        ]


def _argmin_converged(scores, fits) -> int:
    masked = np.where([f.converged for f in fits], scores, np.inf)
    if not np.isfinite(masked).any():
        warnings.warn("no fit on the path converged; selecting among all fits",
                      RuntimeWarning, stacklevel=3)
        masked = np.asarray(scores, dtype=float)
    # np.argmin returns the first minimum, i.e. the largest lambda on ties
    return int(np.argmin(masked))


def fit_path(data: DenseData, lambdas, base_config: SolverConfig | None = None,
             gamma: float = 0.5, warm_start: bool = True) -> PathResult:
    """Fit every ``lambda`` in descending order, each warm-started at the
    previous estimate, and select by extended pseudo-BIC."""
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size < 1:
        raise ValueError("lambdas must be a nonempty 1-D sequence")
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambdas must be strictly decreasing")
    base = base_config or SolverConfig()
    fits: list[FitResult] = []
    prev = None
    for lam in lambdas:
        cfg = base.replace(penalty=Uniform(float(lam)),
                           init=prev if warm_start else base.init)
        fit = solve(data, cfg)
        if not fit.converged:
            warnings.warn(f"fit at lambda={lam:.4g} did not converge; "
                          "excluded from selection", RuntimeWarning, stacklevel=2)
        fits.append(fit)
        prev = fit.omega
    losses = np.array([smooth_loss(f.omega, data) for f in fits])
    nnz = [nnz_offdiag(f.omega) for f in fits]
    scores = np.array([_score(l, k, data.n, data.p, gamma) for l, k in zip(losses, nnz)])
    idx = _argmin_converged(scores, fits)
    return PathResult(lambdas, fits, losses, scores, gamma, idx, data.n, data.p)


def debias(data: DenseData, selected: FitResult, phi: float = 0.0,
           base_config: SolverConfig | None = None) -> FitResult:
    """Refit on the off-diagonal support of ``selected`` with penalty
    ``phi * lambda``; entries off that support are held at zero."""
    if not 0 <= phi <= 1:
        raise ValueError(f"phi must lie in [0, 1], got {phi}")
    if not selected.converged:
        warnings.warn("debiasing a fit that did not converge", RuntimeWarning, stacklevel=2)
    base = base_config or SolverConfig()
    lam = selected.penalty.lam_eff
    penalty = Masked(offdiag_support(selected.omega), phi * lam)
    return solve(data, base.replace(penalty=penalty, init=selected.omega))
