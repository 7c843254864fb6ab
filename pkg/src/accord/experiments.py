"""Simulation studies shared by the acceptance suite and ``scripts/``.

Each routine is seeded and returns plain dictionaries so results can be
dumped to JSON or asserted on directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import metrics, selection, sim
from .linalg import spectral_bound
from .solver import BACKTRACKING, FIXED, SolverConfig, Uniform, solve


# -- convergence ---------------------------------------------------------------

def tail_fit(trace, f_star: float, floor: float = 1e-10) -> dict:
    """Least-squares line through ``log(f_t - f*)`` over the tail half of
    the iterates whose gap is above ``floor * |f*|``."""
    gaps = np.asarray(trace, dtype=float) - f_star
    above = np.flatnonzero(gaps > floor * abs(f_star))
    # the gap is monotone, so "above the floor" is a prefix
    last = int(above[-1]) + 1 if above.size else 0
    t = np.arange(last // 2, last)
    if t.size < 3:
        return {"slope": math.nan, "r2": math.nan, "points": int(t.size)}
    y = np.log(gaps[t])
    slope, icpt = np.polyfit(t, y, 1)
    resid = y - (slope * t + icpt)
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return {"slope": float(slope), "r2": r2, "points": int(t.size)}


def convergence_study(p: int = 1000, n: int = 500, density: float = 0.15,
                      lam: float = 0.1, tol: float = 1e-8, seed: int = 0) -> dict:
    """Fixed-step and backtracking runs on one Erdos-Renyi replicate."""
    edges = sim.gen_erdos_renyi(p, round(density * p * (p - 1) / 2), seed)
    model = sim.build_dominant_precision(edges, p, seed)
    data = sim.sample_gaussian(model.theta_true, n, seed + 1)
    spectral_bound(data)
    ref = solve(data, SolverConfig(penalty=Uniform(lam), tol=1e-14, max_iter=50000))
    out = {"p": p, "n": n, "lam": lam, "L": data.spectral_bound,
           "f_star": ref.objective, "reference_iterations": ref.iterations}
    for mode in (FIXED, BACKTRACKING):
        fit = solve(data, SolverConfig(penalty=Uniform(lam), tol=tol, step_mode=mode))
        out[mode] = {"iterations": fit.iterations, "converged": fit.converged,
                     "trace": fit.objective_trace.tolist(),
                     **tail_fit(fit.objective_trace, ref.objective)}
    return out


# -- edge detection and debiasing ------------------------------------------------

@dataclass(frozen=True)
class HubStudy:
    """Settings for the clustered hub-network replicates."""

    n: int = 500
    n_lambdas: int = 20
    ratio: float = 0.1
    gamma: float = 0.5
    phi: float = 0.0
    tol: float = 1e-6
    kind: str = sim.HUB
    extra: dict = field(default_factory=dict)


def hub_replicate(seed: int, study: HubStudy = HubStudy()) -> dict:
    edges = sim.gen_cluster_graph(study.kind, seed)
    model = sim.build_bounded_precision(edges, 1000, seed)
    data = sim.sample_gaussian(model.theta_true, study.n, seed + 1)
    cfg = SolverConfig(tol=study.tol)
    lams = selection.lambda_grid(data, study.n_lambdas, study.ratio)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        path = selection.fit_path(data, lams, cfg, gamma=study.gamma)
    plain = path.fits[path.select(0.0)]
    chosen = path.selected
    refit = selection.debias(data, chosen, study.phi, cfg)
    biased = metrics.evaluate(chosen.omega, model)
    debiased = metrics.evaluate(refit.omega, model)
    return {
        "seed": seed,
        "auprc": metrics.auprc(path, model),
        "pr_curve": metrics.pr_curve([f.omega for f in path.fits], model).tolist(),
        "selected_index": path.selected_index,
        "plain_index": path.select(0.0),
        "fp_epbic": biased.fp,
        "fp_plain": metrics.confusion(plain.omega, model).fp,
        "tp_epbic": biased.tp,
        "mcc": biased.mcc,
        "tse_theta": biased.tse_theta,
        "tse_omega": biased.tse_omega,
        "tse_theta_debiased": debiased.tse_theta,
        "tse_omega_debiased": debiased.tse_omega,
        "all_converged": all(f.converged for f in path.fits) and refit.converged,
    }


# -- error scaling -----------------------------------------------------------

def scaled_lambda(n: int, c: float = 1.0) -> float:
    return c / math.sqrt(n)


def max_error_curve(model: sim.GraphModel, ns, replicates: int = 5, c: float = 1.0,
                    seed: int = 0, config: SolverConfig | None = None) -> dict:
    """Mean max-norm error of the estimate of ``Omega*`` per sample size,
    and the slope of ``log(error)`` on ``log(n)``."""
    base = config or SolverConfig()
    means, converged = [], True
    for n in ns:
        errs = []
        for r in range(replicates):
            data = sim.sample_gaussian(model.theta_true, n, seed + 1000 * r + n)
            fit = solve(data, base.replace(penalty=Uniform(scaled_lambda(n, c))))
            converged &= fit.converged
            errs.append(metrics.max_error(fit.omega, model.omega_true))
        means.append(float(np.mean(errs)))
    slope = float(np.polyfit(np.log(ns), np.log(means), 1)[0])
    return {"ns": list(ns), "mean_max_error": means, "slope": slope,
            "all_converged": bool(converged)}


def star_errors(ds, p: int = 200, n: int = 2000, replicates: int = 5, c: float = 1.0,
                seed: int = 0, config: SolverConfig | None = None) -> dict:
    """Mean max-norm error at fixed ``n`` for each star size ``d``."""
    base = config or SolverConfig()
    means = []
    for d in ds:
        model = sim.gen_star(p, d)
        errs = []
        for r in range(replicates):
            data = sim.sample_gaussian(model.theta_true, n, seed + 1000 * r + d)
            fit = solve(data, base.replace(penalty=Uniform(scaled_lambda(n, c))))
            errs.append(metrics.max_error(fit.omega, model.omega_true))
        means.append(float(np.mean(errs)))
    lo, hi = min(means), max(means)
    return {"ds": list(ds), "mean_max_error": means, "variation": (hi - lo) / lo}


# -- sampler -----------------------------------------------------------------

def factor_covariance_error(p: int = 20, n: int = 50000, avg_degree: float = 3.0,
                            seed: int = 0) -> float:
    """Relative Frobenius gap between the sample covariance and ``(L L^T)^-1``."""
    factor = sim.gen_cholesky_factor(p, avg_degree, seed)
    data = sim.sample_from_factor(factor, n, seed + 1)
    emp = data.values.T @ data.values / n
    exact = np.linalg.inv(sp.csr_array(factor.precision()).toarray())
    return float(np.linalg.norm(emp - exact) / np.linalg.norm(exact))
