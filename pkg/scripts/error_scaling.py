"""Max-norm estimation error against sample size (chain) and star size.

    python3 scripts/error_scaling.py --c 1.0
"""

import argparse
import json
import warnings
from pathlib import Path

from accord.experiments import max_error_curve, star_errors
from accord.sim import gen_chain
from accord.solver import SolverConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--c", type=float, default=1.0, help="lambda = c / sqrt(n)")
    ap.add_argument("--rho", type=float, nargs="+", default=[0.2, 0.3, 0.4, 0.5])
    ap.add_argument("--ns", type=int, nargs="+", default=[250, 500, 1000, 2000, 4000])
    ap.add_argument("--star-d", type=int, nargs="+", default=[11, 21, 41])
    ap.add_argument("--star-n", type=int, default=2000)
    ap.add_argument("--replicates", type=int, default=5)
    ap.add_argument("--out", default="results/error_scaling")
    args = ap.parse_args()

    # ill-conditioned chains need many iterations; reusing the last step helps
    cfg = SolverConfig(warm_step=True, max_iter=50000)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = {"c": args.c, "chain": {}, "star": None}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for rho in args.rho:
            r = max_error_curve(gen_chain(120, rho), args.ns, args.replicates, args.c, config=cfg)
            results["chain"][str(rho)] = r
            errs = " ".join(f"{e:.4f}" for e in r["mean_max_error"])
            print(f"chain rho={rho}: {errs}  slope={r['slope']:.3f}")
    r = star_errors(args.star_d, n=args.star_n, replicates=args.replicates, c=args.c, config=cfg)
    results["star"] = r
    for d, e in zip(r["ds"], r["mean_max_error"]):
        print(f"star d={d}: {e:.4f}")
    print(f"star relative spread {r['variation']:.3f}")
    (out / "error_scaling.json").write_text(json.dumps(results, indent=2))


if __name__ == "__main__":
    main()
