"""The ACCORD estimator and its forward-backward splitting solver.

The objective over a (possibly asymmetric) ``p x p`` matrix ``Omega`` is::

    f(Omega) = -sum_i log(omega_ii) + (1/2) tr(Omega^T Omega S) + lam * |Omega|_1

with ``S = X^T X / n``. It is split into the smooth quadratic part
``g(Omega) = (1/2) tr(Omega^T Omega S)``, whose gradient ``Omega S`` is
``L``-Lipschitz with ``L`` the top eigenvalue of ``S``, and the separable
part ``h`` made of the log barrier on the diagonal and the l1 penalty. The
proximal map of ``h`` has a closed form: a positive quadratic root on the
diagonal and soft-thresholding off it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.sparse as sp

from .linalg import (
    DENSE_CAP,
    DenseData,
    as_sparse_square,
    gram,
    offdiag_support,
    spectral_bound,
)

logger = logging.getLogger(__name__)

# entries smaller than this after the prox are stored as exact zeros
_DROP = 1e-300


class NumericalError(ArithmeticError):
    """The objective became non-finite during the iteration."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


# -- penalties ---------------------------------------------------------------

@dataclass(frozen=True)
class Uniform:
    """``lam * |Omega|_1`` on every entry, diagonal included."""

    lam: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")

    @property
    def lam_eff(self) -> float:
        return self.lam


@dataclass(frozen=True)
class Masked:
    """Penalty ``lam_eff`` on the diagonal and on ``support``; off-diagonal
    entries outside ``support`` are forced to zero.

    ``support`` is a boolean sparse ``p x p`` pattern of allowed off-diagonal
    positions (its diagonal is ignored).
    """

    support: sp.csr_array
    lam_eff: float

    def __post_init__(self):
        if not self.lam_eff >= 0:
            raise ValueError(f"lam_eff must be nonnegative, got {self.lam_eff}")
        object.__setattr__(self, "support", offdiag_support(self.support))

    @classmethod
    def from_pairs(cls, p: int, pairs, lam_eff: float) -> "Masked":
        pairs = list(pairs)
        rows = [i for i, _ in pairs]
        cols = [j for _, j in pairs]
        pattern = sp.csr_array(
            (np.ones(len(pairs), dtype=bool), (rows, cols)), shape=(p, p))
        return cls(pattern, lam_eff)

    def mask_rows(self, r0: int, r1: int) -> np.ndarray:
        """Dense boolean mask of allowed entries for rows ``r0:r1``."""
        m = self.support[r0:r1].toarray()
        idx = np.arange(r0, r1)
        m[idx - r0, idx] = True
        return m


PenaltyPolicy = Union[Uniform, Masked]


def penalty_value(omega, penalty: PenaltyPolicy) -> float:
    omega = sp.csr_array(omega)
    if isinstance(penalty, Masked):
        off = offdiag_support(omega)
        if off.multiply(penalty.support).nnz < off.nnz:
            return math.inf
    return penalty.lam_eff * float(np.abs(omega.data).sum())


# -- proximal map ------------------------------------------------------------

def prox_diag(y, tau, lam):
    """Minimizer of ``-log w + lam*w + (w - y)**2 / (2*tau)`` over ``w > 0``.

    Evaluated in a cancellation-free form when ``y - tau*lam`` is negative.
    """
    a = np.asarray(y, dtype=np.float64) - tau * lam
    root = np.sqrt(a * a + 4.0 * tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a >= 0, (a + root) / 2.0, 2.0 * tau / (root - a))
    return out if out.ndim else float(out)


def soft_threshold(y, a):
    y = np.asarray(y, dtype=np.float64)
    out = np.sign(y) * np.maximum(np.abs(y) - a, 0.0)
    return out if out.ndim else float(out)


def prox_h(v: np.ndarray, tau: float, penalty: PenaltyPolicy,
           row_offset: int = 0) -> sp.csr_array:
    """Apply the prox of ``tau * h`` to the dense row block ``v``.

    ``v`` holds rows ``row_offset : row_offset + v.shape[0]`` of the forward
    step. Returns those rows in CSR form with the diagonal always stored.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    nrow, p = v.shape
    rows = np.arange(nrow)
    cols = rows + row_offset
    lam = penalty.lam_eff
    diag = prox_diag(v[rows, cols], tau, lam)
    # soft-threshold in place; magnitudes below _DROP (incl. negatives) go to 0
    out = np.abs(v)
    out -= tau * lam
    out[out < _DROP] = 0.0
    np.copysign(out, v, out=out)
    if isinstance(penalty, Masked):
        out *= penalty.mask_rows(row_offset, row_offset + nrow)
    out[rows, cols] = 0.0
    block = sp.csr_array(out)
    block = block + sp.csr_array((diag, (rows, cols)), shape=(nrow, p))
    block.sort_indices()
    return block


# -- transforms --------------------------------------------------------------

def _positive_diagonal(m) -> np.ndarray:
    d = m.diagonal()
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        i = int(np.flatnonzero(~(d > 0))[0]) if np.any(~(d > 0)) else -1
        raise ValueError(f"diagonal must be strictly positive (entry {i})")
    return d


def _scale_rows(m, scale: np.ndarray) -> sp.csr_array:
    out = sp.csr_array(m, copy=True)
    out.data = out.data * np.repeat(scale, np.diff(out.indptr))
    return out


def theta_to_omega(theta) -> sp.csr_array:
    """``Theta -> diag(Theta)^(-1/2) Theta``; the sparsity pattern is kept."""
    theta = sp.csr_array(theta)
    return _scale_rows(theta, 1.0 / np.sqrt(_positive_diagonal(theta)))


def omega_to_theta(omega) -> sp.csr_array:
    """Inverse of :func:`theta_to_omega`: ``Omega -> diag(Omega) Omega``."""
    omega = sp.csr_array(omega)
    return _scale_rows(omega, _positive_diagonal(omega))


def partial_correlations(omega) -> sp.csr_array:
    """Symmetric off-diagonal partial correlations
    ``-(w_ij / w_jj + w_ji / w_ii) / 2``.

    An entry is present whenever either ``w_ij`` or ``w_ji`` is nonzero,
    even if the two terms cancel.
    """
    omega = sp.csr_array(omega)
    d = _positive_diagonal(omega)
    coo = omega.tocoo()
    keep = (coo.row != coo.col) & (coo.data != 0)
    r, c, v = coo.row[keep], coo.col[keep], coo.data[keep]
    # each directed entry contributes to both (r, c) and (c, r)
    term = v / d[c]
    rows = np.concatenate([r, c])
    cols = np.concatenate([c, r])
    vals = np.concatenate([term, term]) * -0.5
    p = omega.shape[0]
    rho = sp.coo_array((vals, (rows, cols)), shape=(p, p)).tocsr()
    rho.sum_duplicates()
    rho.sort_indices()
    return rho


# -- smooth part -------------------------------------------------------------

def objective(omega, data: DenseData, penalty: PenaltyPolicy) -> float:
    """``f(Omega)``, with the quadratic term taken from ``Y = Omega X^T``.

    Returns ``inf`` when a diagonal entry is not positive or a masked-out
    entry is nonzero.
    """
    omega = sp.csr_array(omega)
    d = omega.diagonal()
    if np.any(d <= 0):
        return math.inf
    y = np.asarray(omega @ data.values.T)
    quad = float(np.einsum("ij,ij->", y, y)) / (2.0 * data.n)
    return -float(np.log(d).sum()) + quad + penalty_value(omega, penalty)


def smooth_loss(omega, data: DenseData) -> float:
    """The unpenalized loss ``-sum log w_ii + ||Omega X^T||_F^2 / (2n)``."""
    omega = sp.csr_array(omega)
    d = omega.diagonal()
    if np.any(d <= 0):
        return math.inf
    y = np.asarray(omega @ data.values.T)
    return -float(np.log(d).sum()) + float(np.einsum("ij,ij->", y, y)) / (2.0 * data.n)


def gradient_g(omega, data: DenseData) -> np.ndarray:
    """Dense gradient ``Omega S`` computed as ``(Omega X^T) X / n``."""
    omega = sp.csr_array(omega)
    if omega.shape != (data.p, data.p):
        raise ValueError(f"omega shape {omega.shape} does not match p={data.p}")
    y = np.asarray(omega @ data.values.T)
    return (y @ data.values) / data.n


class _GramEngine:
    """Gradient through a materialized ``S``; the whole matrix is one block."""

    def __init__(self, data, s, parallel=None):
        self.s = s
        self.p = data.p
        self.parallel = parallel

    def evaluate(self, omega):
        if self.parallel is not None:
            grad = self.parallel(omega)
        elif omega.nnz > 0.1 * self.p * self.p:
            grad = omega.toarray() @ self.s
        else:
            grad = np.asarray(omega @ self.s)
        coo = omega.tocoo()
        g = 0.5 * float(coo.data @ grad[coo.row, coo.col])
        return g, grad

    def blocks(self):
        yield 0, self.p

    def grad_rows(self, state, r0, r1):
        return state[r0:r1]


class _DataEngine:
    """Matrix-free gradient through ``Y = Omega X^T``, processed in row blocks."""

    def __init__(self, data, block_rows, product=None):
        self.x = data.values
        self.n = data.n
        self.p = data.p
        self.block_rows = block_rows
        self.product = product

    def evaluate(self, omega):
        if self.product is not None:
            y = self.product(omega)
        else:
            y = np.asarray(omega @ self.x.T)
        return float(np.einsum("ij,ij->", y, y)) / (2.0 * self.n), y

    def blocks(self):
        for r0 in range(0, self.p, self.block_rows):
            yield r0, min(r0 + self.block_rows, self.p)

    def grad_rows(self, state, r0, r1):
        return (state[r0:r1] @ self.x) / self.n


def _make_engine(data: DenseData, config: "SolverConfig"):
    from . import parallel as par

    workers = config.workers
    if data.p <= config.dense_cap:
        s = gram(data, config.dense_cap).values
        hook = None
        if workers > 1:
            part = par.BlockPartition.even(data.p, workers)
            if data.n < data.p * config.two_step_ratio:
                hook = lambda om: par.two_step_gradient(om, data, part).values
            else:
                hook = lambda om: par.ring_multiply(om, s, part).values
        return _GramEngine(data, s, hook)
    block = config.block_rows or max(1, (1 << 22) // data.p)
    hook = None
    if workers > 1:
        part = par.BlockPartition.even(data.p, workers)
        xt = np.ascontiguousarray(data.values.T)
        hook = lambda om: par.ring_multiply(om, xt, part).values
    return _DataEngine(data, block, hook)


# -- solver ------------------------------------------------------------------

FIXED = "fixed"
BACKTRACKING = "backtracking"


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs for :func:`solve`.

    ``tau0=None`` means ``1/L`` for the fixed step and ``1.0`` for
    backtracking. ``init=None`` starts from the identity; otherwise it is a
    warm-start matrix. ``warm_step`` starts each line search from the last
    accepted step divided by ``beta`` instead of ``tau0``.
    """

    penalty: PenaltyPolicy = field(default_factory=lambda: Uniform(0.1))
    tau0: float | None = None
    beta: float = 0.5
    tol: float = 1e-8
    max_iter: int = 10000
    step_mode: str = BACKTRACKING
    init: sp.csr_array | None = None
    warm_step: bool = False
    dense_cap: int = DENSE_CAP
    block_rows: int | None = None
    workers: int = 1
    two_step_ratio: float = 0.25

    def __post_init__(self):
        if self.tau0 is not None and not self.tau0 > 0:
            raise ValueError(f"tau0 must be positive, got {self.tau0}")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.step_mode not in (FIXED, BACKTRACKING):
            raise ValueError(f"unknown step_mode {self.step_mode!r}")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")

    def replace(self, **changes) -> "SolverConfig":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class FitResult:
    omega: sp.csr_array
    iterations: int
    objective_trace: np.ndarray
    step_trace: np.ndarray
    final_step: float
    converged: bool
    kkt_residual: float
    penalty: PenaltyPolicy

    @property
    def lam(self) -> float:
        return self.penalty.lam_eff

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


def _sweep(engine, omega, state, tau, penalty):
    """One forward-backward step; also returns ``<Delta, grad g(Omega)>``."""
    pieces = []
    inner = 0.0
    for r0, r1 in engine.blocks():
        grad = engine.grad_rows(state, r0, r1)
        cur = omega[r0:r1].toarray()
        new = prox_h(cur - tau * grad, tau, penalty, row_offset=r0)
        delta = new.toarray() - cur
        inner += float(np.einsum("ij,ij->", delta, grad))
        pieces.append(new)
    new_omega = pieces[0] if len(pieces) == 1 else sp.csr_array(sp.vstack(pieces, format="csr"))
    new_omega.sort_indices()
    return new_omega, inner


def _h(omega, penalty) -> float:
    d = omega.diagonal()
    return -float(np.log(d).sum()) + penalty_value(omega, penalty)


def solve(data: DenseData, config: SolverConfig | None = None) -> FitResult:
    """Minimize the ACCORD objective by forward-backward splitting.

    Iterates ``Omega <- prox_{tau h}(Omega - tau * Omega S)`` until the
    Frobenius norm of the update drops below ``config.tol``. With
    ``step_mode="backtracking"`` each step starts at ``tau0`` and shrinks by
    ``beta`` until the quadratic upper bound on ``g`` holds, and is accepted
    unconditionally once it reaches ``1/L``.

    Raises
    ------
    NumericalError
        If the objective becomes non-finite.
    """
    config = config or SolverConfig()
    penalty = config.penalty
    p = data.p
    L = data.spectral_bound if data.spectral_bound is not None else spectral_bound(data)
    if L <= 0:
        logger.warning("degenerate data: spectral bound is 0")
        L = np.finfo(float).tiny
    tau_min = 1.0 / L

    if config.step_mode == FIXED:
        tau0 = config.tau0 if config.tau0 is not None else tau_min
        tau_cap = 2.0 / L * (1 - 1e-6)
        if tau0 >= 2.0 / L:
            logger.warning("fixed step %.3g clamped below 2/L = %.3g", tau0, 2.0 / L)
            tau0 = tau_cap
    else:
        tau0 = config.tau0 if config.tau0 is not None else 1.0

    if config.init is None:
        omega = as_sparse_square(sp.eye_array(p, format="csr"))
    else:
        omega = as_sparse_square(config.init)
        if omega.shape != (p, p):
            raise ValueError(f"init shape {omega.shape} does not match p={p}")
        if isinstance(penalty, Masked):
            allowed = offdiag_support(omega).multiply(penalty.support)
            omega = as_sparse_square(omega.multiply(sp.eye_array(p)) + omega.multiply(allowed))
        if np.any(omega.diagonal() <= 0):
            raise ValueError("warm start must have a positive diagonal")

    engine = _make_engine(data, config)
    g, state = engine.evaluate(omega)
    f = g + _h(omega, penalty)
    if not math.isfinite(f):
        raise NumericalError("initial objective is not finite", iteration=0)
    trace = [f]
    steps = [0.0]
    tau_prev = tau0
    converged = False
    it = 0

    for it in range(1, config.max_iter + 1):
        if config.step_mode == FIXED:
            tau = tau0
            new, _ = _sweep(engine, omega, state, tau, penalty)
            g_new, state_new = engine.evaluate(new)
        else:
            tau = min(tau_prev / config.beta, tau0) if config.warm_step else tau0
            while True:
                new, inner = _sweep(engine, omega, state, tau, penalty)
                g_new, state_new = engine.evaluate(new)
                dnorm2 = _frob2_diff(new, omega)
                if tau <= tau_min or g_new <= g + inner + dnorm2 / (2.0 * tau):
                    break
                tau = max(config.beta * tau, tau_min)
            tau_prev = tau

        f_new = g_new + _h(new, penalty)
        if not math.isfinite(f_new):
            raise NumericalError(f"objective became {f_new} at iteration {it}", iteration=it)
        diff = math.sqrt(_frob2_diff(new, omega))
        omega, state, g = new, state_new, g_new
        trace.append(f_new)
        steps.append(tau)
        if diff < config.tol:
            converged = True
            break
    else:
        it = config.max_iter

    if not converged:
        logger.warning("solver stopped after %d iterations without converging", it)
    kkt = kkt_residual(omega, data, penalty, dense_cap=config.dense_cap)
    return FitResult(
        omega=omega,
        iterations=it,
        objective_trace=np.asarray(trace),
        step_trace=np.asarray(steps),
        final_step=steps[-1],
        converged=converged,
        kkt_residual=kkt,
        penalty=penalty,
    )


def _frob2_diff(a, b) -> float:
    d = (a - b).data
    return float(d @ d)


def kkt_residual(omega, data: DenseData, penalty: PenaltyPolicy,
                 dense_cap: int = DENSE_CAP, block_rows: int | None = None) -> float:
    """Largest violation of ``-diag(Omega)^-1 + Omega S + lam Z = 0``.

    Nonzero entries must satisfy it with ``Z = sign(omega_ij)``; zero
    off-diagonal entries need ``|[Omega S]_ij| <= lam``. Positions fixed at
    zero by a :class:`Masked` penalty are skipped.
    """
    omega = sp.csr_array(omega)
    p = data.p
    d = _positive_diagonal(omega)
    lam = penalty.lam_eff
    x = data.values
    y = np.asarray(omega @ x.T)
    block = block_rows or max(1, (1 << 22) // p)
    worst = 0.0
    for r0 in range(0, p, block):
        r1 = min(r0 + block, p)
        grad = (y[r0:r1] @ x) / data.n
        cur = omega[r0:r1].toarray()
        rows = np.arange(r1 - r0)
        grad[rows, rows + r0] -= 1.0 / d[r0:r1]
        nz = cur != 0
        viol = np.where(nz, np.abs(grad + lam * np.sign(cur)),
                        np.maximum(np.abs(grad) - lam, 0.0))
        if isinstance(penalty, Masked):
            viol = np.where(penalty.mask_rows(r0, r1), viol, 0.0)
        worst = max(worst, float(viol.max()))
    return worst
