"""Edge-recovery and estimation-error metrics against a known ground truth.

An edge ``{i, j}`` counts as selected when either ``w_ij`` or ``w_ji`` of
the asymmetric estimate is nonzero.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .sim import GraphModel
from .solver import omega_to_theta

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        sel = self.tp + self.fp
        return self.tp / sel if sel else math.nan

    @property
    def recall(self) -> float:
        pos = self.tp + self.fn
        return self.tp / pos if pos else math.nan


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    mcc: float
    tse_theta: float
    tse_omega: float
    max_error_omega: float
    sign_accuracy: float
    auprc: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def selected_edges(estimate) -> set[tuple[int, int]]:
    coo = sp.coo_array(estimate)
    keep = (coo.data != 0) & (coo.row != coo.col)
    r, c = coo.row[keep], coo.col[keep]
    lo, hi = np.minimum(r, c), np.maximum(r, c)
    return set(zip(lo.tolist(), hi.tolist()))


def confusion(estimate, truth: GraphModel) -> Confusion:
    if estimate.shape != (truth.p, truth.p):
        raise ValueError(f"estimate shape {estimate.shape} does not match p={truth.p}")
    sel = selected_edges(estimate)
    true = set(truth.edges)
    tp = len(sel & true)
    fp = len(sel) - tp
    fn = len(true) - tp
    tn = truth.p * (truth.p - 1) // 2 - tp - fp - fn
    return Confusion(tp, fp, fn, tn)


def mcc(counts: Confusion) -> float:
    """Matthews correlation; 0 when any marginal is empty."""
    tp, fp, fn, tn = counts.tp, counts.fp, counts.fn, counts.tn
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def pr_points(estimates, truth: GraphModel) -> list[tuple[float, float]]:
    """``(recall, precision)`` per estimate; estimates with no edges are skipped."""
    pts = []
    for est in estimates:
        c = confusion(est, truth)
        if c.tp + c.fp == 0:
            continue
        pts.append((c.recall, c.precision))
    return pts


def area_under_pr(points) -> float:
    """Step-wise area: each recall increment is weighted by the precision at
    its right end. The curve starts at recall 0 with the precision of the
    lowest-recall point and stops at the largest recall reached."""
    if not points:
        warnings.warn("no estimate selected any edge; AUPRC is 0", RuntimeWarning,
                      stacklevel=2)
        return 0.0
    pts = sorted(set(points), key=lambda rp: (rp[0], -rp[1]))
    area = 0.0
    prev_r = 0.0
    for r, prec in pts:
        area += (r - prev_r) * prec
        prev_r = r
    return area


def auprc(path, truth: GraphModel) -> float:
    """Area under the precision-recall curve traced by a regularization path.

    ``path`` is a :class:`~accord.selection.PathResult` or a sequence of
    estimates.
    """
    fits = getattr(path, "fits", None)
    estimates = [f.omega for f in fits] if fits is not None else list(path)
    if len(estimates) < 2:
        raise ValueError("a path needs at least two fits")
    return area_under_pr(pr_points(estimates, truth))


def pointwise_auprc(curves) -> float:
    """AUPRC of the curve averaged point-by-point across replicates.

    ``curves`` holds one list of ``(recall, precision)`` per replicate, all
    indexed by the same lambda grid; ``nan`` marks an empty estimate.
    """
    arr = np.asarray(curves, dtype=float)
    mean = np.nanmean(arr, axis=0)
    pts = [tuple(rp) for rp in mean if np.all(np.isfinite(rp))]
    return area_under_pr(pts)


def pr_curve(estimates, truth: GraphModel) -> np.ndarray:
    """Recall and precision per estimate, ``nan`` where nothing is selected."""
    out = []
    for est in estimates:
        c = confusion(est, truth)
        out.append((c.recall, c.precision) if c.tp + c.fp else (math.nan, math.nan))
    return np.array(out)


def total_squared_error(estimate, truth) -> float:
    d = sp.csr_array(estimate) - sp.csr_array(truth)
    return float(d.data @ d.data)


def max_error(estimate, truth) -> float:
    d = sp.csr_array(estimate) - sp.csr_array(truth)
    return float(np.abs(d.data).max()) if d.nnz else 0.0


def sign_accuracy(estimate, truth: GraphModel) -> float:
    """Fraction of true off-diagonal positions whose estimated sign matches."""
    coo = sp.coo_array(truth.omega_true)
    keep = (coo.row != coo.col) & (coo.data != 0)
    if not keep.any():
        return 1.0
    est = sp.csr_array(estimate)
    vals = est[coo.row[keep], coo.col[keep]]
    return float(np.mean(np.sign(np.asarray(vals).ravel()) == np.sign(coo.data[keep])))


def evaluate(omega, truth: GraphModel, path=None) -> EvalReport:
    c = confusion(omega, truth)
    return EvalReport(
        tp=c.tp, fp=c.fp, fn=c.fn, tn=c.tn,
        mcc=mcc(c),
        tse_theta=total_squared_error(omega_to_theta(omega), truth.theta_true),
        tse_omega=total_squared_error(omega, truth.omega_true),
        max_error_omega=max_error(omega, truth.omega_true),
        sign_accuracy=sign_accuracy(omega, truth),
        auprc=None if path is None else auprc(path, truth),
    )


def summarize(values) -> dict:
    """Mean and sample standard deviation."""
    a = np.asarray(values, dtype=float)
    sd = float(a.std(ddof=1)) if a.size > 1 else 0.0
    return {"mean": float(a.mean()), "sd": sd, "count": int(a.size)}
