"""Command-line interface: ``accord {simulate,fit,eval,bench,replicate}``.

Every command writes its outputs plus a ``manifest.json`` into ``--out``.
Exit codes: 0 success, 2 usage, 3 non-convergence, 4 I/O, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import platform
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import __version__
from . import fileio, metrics, parallel, selection, sim
from .linalg import DenseData, center_columns, nnz_offdiag, spectral_bound
from .solver import (
    BACKTRACKING,
    FIXED,
    NumericalError,
    SolverConfig,
    Uniform,
    partial_correlations,
    solve,
)

logger = logging.getLogger("accord")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3
EXIT_IO = 4
EXIT_NUMERIC = 5

KINDS = ("er", "hub", "scalefree", "chain", "star", "cholesky")


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    params: dict
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    version: str = __version__
    python: str = platform.python_version()
    wall_time: float = 0.0

    def write(self, out_dir: Path) -> None:
        fileio.write_json(out_dir / "manifest.json", asdict(self))


def default_workers() -> int:
    env = os.environ.get("ACCORD_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# -- simulate ----------------------------------------------------------------

def simulate_model(args):
    """Build ``(GraphModel, DenseData)`` from parsed CLI arguments."""
    kind, seed, p, n = args.kind, args.seed, args.p, args.n
    if kind == "chain":
        model = sim.gen_chain(p or 120, args.rho)
    elif kind == "star":
        model = sim.gen_star(p or 200, args.d)
    elif kind in ("hub", "scalefree"):
        edges = sim.gen_cluster_graph(kind, seed)
        model = sim.build_bounded_precision(edges, 1000, seed)
    elif kind == "er":
        p = p or 1000
        if args.density is not None:
            m = round(args.density * p * (p - 1) / 2)
            edges = sim.gen_erdos_renyi(p, m, seed)
            model = sim.build_dominant_precision(edges, p, seed)
        else:
            edges = sim.gen_erdos_renyi(p, args.edges or p, seed)
            model = sim.build_bounded_precision(edges, p, seed)
    elif kind == "cholesky":
        factor = sim.gen_cholesky_factor(p or 1000, args.avg_degree, seed)
        data = sim.sample_from_factor(factor, n, seed + 1)
        theta = factor.precision()
        model = sim.graph_model(theta, {"kind": "cholesky", "avg_degree": args.avg_degree},
                                check=theta.shape[0] <= sim.EIG_CHECK_CAP)
        return model, data
    else:
        raise UsageError(f"unknown kind {kind!r}")
    data = sim.sample_gaussian(model.theta_true, n, seed + 1)
    return model, data


def write_model(out: Path, model, data: DenseData, fmt: str) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    data_path = out / ("X.bin" if fmt == "bin" else "X.csv")
    fileio.write_data(data_path, data.values, fmt)
    fileio.write_matrix_market(out / "theta_true.mtx", model.theta_true)
    with open(out / "edges.tsv", "w") as fh:
        fh.write("i\tj\n")
        for i, j in sorted(model.edges):
            fh.write(f"{i}\t{j}\n")
    meta = dict(model.generator)
    meta.update(p=model.p, n=data.n, num_edges=len(model.edges), max_degree=model.max_degree)
    fileio.write_json(out / "metadata.json", meta)
    return {"data": str(data_path), "theta_true": str(out / "theta_true.mtx"),
            "edges": str(out / "edges.tsv"), "metadata": str(out / "metadata.json")}


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    model, data = simulate_model(args)
    out = Path(args.out)
    outputs = write_model(out, model, data, args.format)
    RunManifest("simulate", _params(args), {"seed": args.seed}, {}, outputs,
                wall_time=time.perf_counter() - t0).write(out)
    return EXIT_OK


# -- fit ---------------------------------------------------------------------

def _config(args) -> SolverConfig:
    return SolverConfig(
        tau0=args.tau0, beta=args.beta, tol=args.tol, max_iter=args.max_iter,
        step_mode=args.step, workers=args.workers, warm_step=args.warm_step)


def _write_fit(out: Path, fit, suffix: str = "") -> dict:
    paths = {"omega" + suffix: out / f"omega{suffix}.mtx",
             "rho" + suffix: out / f"rho{suffix}.tsv",
             "trace" + suffix: out / f"trace{suffix}.csv"}
    fileio.write_matrix_market(paths["omega" + suffix], fit.omega)
    fileio.write_edge_list(paths["rho" + suffix], partial_correlations(fit.omega))
    fileio.write_trace(paths["trace" + suffix], fit.objective_trace, fit.step_trace)
    return {k: str(v) for k, v in paths.items()}


def _fit_summary(fit) -> dict:
    return {"lambda": fit.lam, "iterations": fit.iterations, "converged": fit.converged,
            "objective": fit.objective, "kkt_residual": fit.kkt_residual,
            "final_step": fit.final_step,
            "nnz_offdiag": nnz_offdiag(fit.omega)}


def run_fit(data: DenseData, args, out: Path, truth=None) -> tuple[dict, bool]:
    """Fit, optionally select and debias; returns ``(report, all_converged)``."""
    out.mkdir(parents=True, exist_ok=True)
    cfg = _config(args)
    report: dict = {"n": data.n, "p": data.p}
    outputs: dict = {}
    ok = True
    spectral_bound(data)
    if args.lam is not None and not args.path:
        fit = solve(data, cfg.replace(penalty=Uniform(args.lam)))
        ok = fit.converged
        report["fit"] = _fit_summary(fit)
        outputs.update(_write_fit(out, fit))
        chosen = fit
    else:
        lams = selection.lambda_grid(data, args.n_lambdas, args.ratio)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            path = selection.fit_path(data, lams, cfg, gamma=args.gamma)
        fileio.write_json(out / "path.json", path.report())
        pdir = out / "path"
        pdir.mkdir(exist_ok=True)
        for k, f in enumerate(path.fits):
            fileio.write_matrix_market(pdir / f"omega_{k:03d}.mtx", f.omega)
        chosen = path.selected
        ok = chosen.converged
        report["selected_index"] = path.selected_index
        report["fit"] = _fit_summary(chosen)
        outputs.update(_write_fit(out, chosen))
        outputs["path"] = str(out / "path.json")
        if truth is not None:
            report["auprc"] = metrics.auprc(path, truth)
            curve = metrics.pr_curve([f.omega for f in path.fits], truth)
            _write_pr(out / "pr.csv", path.lambdas, curve)
            report["plain_bic_index"] = path.select(0.0)
    if truth is not None:
        report["eval"] = metrics.evaluate(chosen.omega, truth).to_dict()
    if args.debias:
        refit = selection.debias(data, chosen, args.phi, cfg)
        ok = ok and refit.converged
        report["debiased"] = _fit_summary(refit)
        outputs.update(_write_fit(out, refit, "_debiased"))
        if truth is not None:
            report["eval_debiased"] = metrics.evaluate(refit.omega, truth).to_dict()
    report["converged"] = ok
    report["outputs"] = outputs
    fileio.write_json(out / "report.json", report)
    return report, ok


def _write_pr(path, lambdas, curve):
    with open(path, "w") as fh:
        fh.write("lambda,recall,precision\n")
        for lam, (r, prec) in zip(lambdas, curve):
            fh.write(f"{lam!r},{r!r},{prec!r}\n")


def _load_truth(path):
    if path is None:
        return None
    return sim.graph_model(fileio.read_matrix_market(path), check=False)


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    raw = fileio.read_data(args.data)
    data = center_columns(raw)
    truth = _load_truth(args.truth)
    out = Path(args.out)
    report, ok = run_fit(data, args, out, truth)
    RunManifest("fit", _params(args), {}, {"data": args.data, "truth": args.truth},
                report["outputs"], wall_time=time.perf_counter() - t0).write(out)
    if not ok:
        logger.error("solver did not converge; outputs are partial")
        return EXIT_NONCONVERGED
    return EXIT_OK


# -- eval --------------------------------------------------------------------

def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    truth = _load_truth(args.truth)
    est = fileio.read_matrix_market(args.estimate)
    if est.shape != (truth.p, truth.p):
        raise UsageError(f"estimate is {est.shape[0]}x{est.shape[1]} but truth has p={truth.p}")
    estimates = None
    if args.path_dir:
        pdir = Path(args.path_dir)
        files = sorted((pdir / "path").glob("omega_*.mtx"))
        estimates = [fileio.read_matrix_market(f) for f in files]
    report = metrics.evaluate(est, truth, path=estimates if estimates and len(estimates) > 1 else None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_json(out / "eval.json", report.to_dict())
    outputs = {"eval": str(out / "eval.json")}
    if estimates:
        import json
        lambdas = [row["lambda"] for row in json.loads((pdir / "path.json").read_text())]
        _write_pr(out / "pr.csv", lambdas, metrics.pr_curve(estimates, truth))
        outputs["pr"] = str(out / "pr.csv")
    RunManifest("eval", _params(args), {}, {"estimate": args.estimate, "truth": args.truth},
                outputs, wall_time=time.perf_counter() - t0).write(out)
    return EXIT_OK


# -- bench -------------------------------------------------------------------

def bench(p: int, n: int, density: float, workers, seed: int = 0, repeat: int = 3) -> list[dict]:
    """Time the ring product ``Omega @ S`` for each worker count.

    The product is first checked against the serial result for every
    worker count; timing starts only once all agree.
    """
    rng = np.random.default_rng(seed)
    data = center_columns(rng.standard_normal((n, p)))
    omega = sp.random_array((p, p), density=density, rng=rng, format="csr")
    omega = sp.csr_array(omega + sp.eye_array(p))
    operand = (data.values.T @ data.values) / n
    reference = np.asarray(omega @ operand)
    ref_norm = np.linalg.norm(reference)
    for P in workers:
        got = parallel.ring_multiply(omega, operand, parallel.BlockPartition.even(p, P)).values
        err = np.linalg.norm(got - reference) / ref_norm
        if err > 1e-10:
            raise NumericalError(f"ring product with P={P} differs from serial by {err:.3g}")
    records = []
    for P in workers:
        part = parallel.BlockPartition.even(p, P)
        best = np.inf
        for _ in range(repeat):
            t = time.perf_counter()
            res = parallel.ring_multiply(omega, operand, part)
            best = min(best, time.perf_counter() - t)
        records.append({"p": p, "n": n, "nnz": int(omega.nnz), "P": part.P,
                        "seconds": best, "bytes_communicated": int(sum(res.bytes_sent))})
    return records


def cmd_bench(args) -> int:
    t0 = time.perf_counter()
    workers = [int(w) for w in args.workers_list.split(",")]
    records = bench(args.p, args.n, args.density, workers, args.seed, args.repeat)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_json(out / "bench.json", records)
    for r in records:
        print(f"P={r['P']:3d}  {r['seconds']:.4f}s  {r['bytes_communicated']} bytes")
    RunManifest("bench", _params(args), {"seed": args.seed}, {},
                {"bench": str(out / "bench.json")},
                wall_time=time.perf_counter() - t0).write(out)
    return EXIT_OK


# -- replicate ---------------------------------------------------------------

def _one_replicate(args, r: int) -> dict:
    rargs = argparse.Namespace(**vars(args))
    rargs.seed = args.seed + r
    model, data = simulate_model(rargs)
    out = Path(args.out) / f"rep_{r:03d}"
    write_model(out, model, data, args.format)
    rargs.debias = True
    rargs.path = True
    rargs.lam = None
    rargs.workers = 1
    report, ok = run_fit(data, rargs, out, model)
    row = {"replicate": r, "seed": rargs.seed, "converged": ok,
           "auprc": report.get("auprc"),
           "tp": report["eval"]["tp"], "fp": report["eval"]["fp"],
           "tse_theta": report["eval"]["tse_theta"], "tse_omega": report["eval"]["tse_omega"],
           "tse_theta_debiased": report["eval_debiased"]["tse_theta"],
           "tse_omega_debiased": report["eval_debiased"]["tse_omega"],
           "mcc": report["eval"]["mcc"]}
    return row


def cmd_replicate(args) -> int:
    t0 = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reps = range(args.replicates)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            rows = list(ex.map(_one_replicate, [args] * args.replicates, reps))
    else:
        rows = [_one_replicate(args, r) for r in reps]
    keys = [k for k in rows[0] if k not in ("replicate", "seed", "converged")]
    summary = {k: metrics.summarize([row[k] for row in rows if row[k] is not None])
               for k in keys}
    fileio.write_json(out / "replicates.json", rows)
    fileio.write_json(out / "summary.json", summary)
    for k, s in summary.items():
        print(f"{k:22s} {s['mean']:.4g} ({s['sd']:.3g})")
    RunManifest("replicate", _params(args), {"seeds": [args.seed + r for r in reps]}, {},
                {"replicates": str(out / "replicates.json"), "summary": str(out / "summary.json")},
                wall_time=time.perf_counter() - t0).write(out)
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONVERGED


# -- parser ------------------------------------------------------------------

def _params(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _add_sim_args(p):
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--p", type=int, default=None, help="dimension (cluster kinds are fixed at 1000)")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho", type=float, default=0.3, help="chain coupling")
    p.add_argument("--d", type=int, default=11, help="star size (hub plus leaves)")
    p.add_argument("--edges", type=int, default=None, help="edge count for --kind er")
    p.add_argument("--density", type=float, default=None,
                   help="edge fraction for --kind er; switches to the diagonally dominant weights")
    p.add_argument("--avg-degree", type=float, default=10.3)
    p.add_argument("--format", choices=("bin", "csv"), default="bin")


def _add_fit_args(p):
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--path", action="store_true", help="fit a lambda path (default without --lambda)")
    p.add_argument("--n-lambdas", type=int, default=30)
    p.add_argument("--ratio", type=float, default=0.01)
    p.add_argument("--select", choices=("epbic",), default="epbic")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--debias", action="store_true")
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--step", choices=(FIXED, BACKTRACKING), default=BACKTRACKING)
    p.add_argument("--tau0", type=float, default=None)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--warm-step", action="store_true")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--workers", type=int, default=None,
                   help="ring workers (default: $ACCORD_WORKERS or CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="accord", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a ground truth and a data matrix")
    _add_sim_args(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="estimate Omega from a data file")
    f.add_argument("--data", required=True)
    f.add_argument("--truth", default=None, help="theta_true.mtx for evaluation")
    _add_fit_args(f)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="compare an estimate with the ground truth")
    e.add_argument("--estimate", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--path-dir", default=None, help="fit output directory with path/ for AUPRC")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="time the ring product for several worker counts")
    b.add_argument("--p", type=int, default=4096)
    b.add_argument("--n", type=int, default=256)
    b.add_argument("--density", type=float, default=0.01)
    b.add_argument("--workers", dest="workers_list", default="1,2,4")
    b.add_argument("--repeat", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("replicate", help="simulate, fit, select, debias and evaluate R times")
    _add_sim_args(r)
    _add_fit_args(r)
    r.add_argument("--replicates", type=int, default=10)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_replicate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 0) is None:
        args.workers = default_workers()
    try:
        return args.func(args)
    except (UsageError, sim.GeneratorError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"accord: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"accord: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, ArithmeticError) as exc:
        print(f"accord: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
