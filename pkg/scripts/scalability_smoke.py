"""Large-p smoke run: sample from a sparse triangular factor and fit one
lambda with the matrix-free gradient and ring workers.

Informational only; timings depend heavily on the machine.

    python3 scripts/scalability_smoke.py --p 20000 --n 200 --workers 8
"""

import argparse
import json
import time
from pathlib import Path

from accord.linalg import nnz_offdiag, spectral_bound
from accord.metrics import confusion
from accord.selection import lambda_max
from accord.sim import gen_cholesky_factor, graph_model, sample_from_factor
from accord.solver import SolverConfig, Uniform, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=20000)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--avg-degree", type=float, default=4.0)
    ap.add_argument("--lam-fraction", type=float, default=0.2,
                    help="lambda as a fraction of the largest off-diagonal |S_ij|")
    ap.add_argument("--workers", type=int, default=8)
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--max-iter", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/scalability")
    args = ap.parse_args()

    t0 = time.perf_counter()
    factor = gen_cholesky_factor(args.p, args.avg_degree, args.seed)
    data = sample_from_factor(factor, args.n, args.seed + 1)
    truth = graph_model(factor.precision(), check=False)
    t_sim = time.perf_counter() - t0

    t0 = time.perf_counter()
    spectral_bound(data)
    lam = args.lam_fraction * lambda_max(data)
    cfg = SolverConfig(penalty=Uniform(lam), tol=args.tol, max_iter=args.max_iter,
                       workers=args.workers, dense_cap=0)
    fit = solve(data, cfg)
    t_fit = time.perf_counter() - t0

    c = confusion(fit.omega, truth)
    res = {"p": args.p, "n": args.n, "workers": args.workers, "lambda": lam,
           "simulate_seconds": t_sim, "fit_seconds": t_fit, "iterations": fit.iterations,
           "converged": fit.converged, "nnz_offdiag": nnz_offdiag(fit.omega),
           "tp": c.tp, "fp": c.fp}
    for k, v in res.items():
        print(f"{k:18s} {v}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "smoke.json").write_text(json.dumps(res, indent=2))


if __name__ == "__main__":
    main()
