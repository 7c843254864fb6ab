"""Ground-truth graphs, precision matrices and Gaussian samplers.

All randomness goes through :func:`numpy.random.default_rng` (PCG64), so
every generator is a pure function of its parameters and seed.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .linalg import DENSE_CAP, DenseData, as_sparse_square, center_columns
from .solver import theta_to_omega

logger = logging.getLogger(__name__)

Edge = tuple[int, int]

#: dimension above which the positive-definiteness check is skipped
EIG_CHECK_CAP = 2000


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class GraphModel:
    p: int
    edges: frozenset
    theta_true: sp.csr_array
    omega_true: sp.csr_array
    max_degree: int
    generator: dict = field(default_factory=dict)

    @property
    def support(self) -> frozenset:
        """Off-diagonal support as ordered pairs ``(i, j)``, both directions."""
        return frozenset(self.edges) | frozenset((j, i) for i, j in self.edges)

    @property
    def min_eigenvalue(self) -> float | None:
        return self.generator.get("min_eigenvalue")


def _edges_from_theta(theta) -> frozenset:
    coo = sp.coo_array(theta)
    keep = (coo.row < coo.col) & (coo.data != 0)
    return frozenset(zip(coo.row[keep].tolist(), coo.col[keep].tolist()))


def _min_eig(theta) -> float:
    return float(scipy.linalg.eigvalsh(theta.toarray(), subset_by_index=[0, 0])[0])


def graph_model(theta, generator: dict | None = None, check: bool = True) -> GraphModel:
    """Wrap a symmetric positive definite ``theta`` and derive the rest."""
    theta = as_sparse_square(theta)
    p = theta.shape[0]
    asym = theta - theta.T
    if asym.nnz and np.any(asym.data != 0):
        raise GeneratorError("theta must be exactly symmetric")
    gen = dict(generator or {})
    if check and p <= EIG_CHECK_CAP:
        lo = _min_eig(theta)
        if not lo > 0:
            raise GeneratorError(f"theta is not positive definite (min eigenvalue {lo:.3g})")
        gen.setdefault("min_eigenvalue", lo)
    omega = theta_to_omega(theta)
    off = theta.copy()
    off.setdiag(0)
    off.eliminate_zeros()
    degree = int(np.diff(off.indptr).max()) if off.nnz else 0
    return GraphModel(p, _edges_from_theta(theta), theta, omega, degree, gen)


def _from_edges(p, edges, weights, diag) -> sp.csr_array:
    edges = list(edges)
    i = np.array([e[0] for e in edges], dtype=np.int64)
    j = np.array([e[1] for e in edges], dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    rows = np.concatenate([i, j, np.arange(p)])
    cols = np.concatenate([j, i, np.arange(p)])
    vals = np.concatenate([w, w, np.broadcast_to(diag, (p,))])
    return as_sparse_square(sp.coo_array((vals, (rows, cols)), shape=(p, p)))


# -- graphs ------------------------------------------------------------------

def _sample_pairs(n_nodes, m, rng, exclude=frozenset()) -> list[Edge]:
    """``m`` distinct undirected pairs on ``range(n_nodes)``, uniformly."""
    total = n_nodes * (n_nodes - 1) // 2
    if m > total - len(exclude):
        raise GeneratorError(f"cannot place {m} edges on {n_nodes} nodes")
    if m > total // 3:
        iu, ju = np.triu_indices(n_nodes, 1)
        order = rng.permutation(total)
        out = []
        for k in order:
            e = (int(iu[k]), int(ju[k]))
            if e not in exclude:
                out.append(e)
                if len(out) == m:
                    break
        return out
    chosen: dict[Edge, None] = {}
    while len(chosen) < m:
        a = rng.integers(0, n_nodes, size=2 * (m - len(chosen)) + 8)
        b = rng.integers(0, n_nodes, size=a.size)
        for u, v in zip(a.tolist(), b.tolist()):
            if u == v:
                continue
            e = (u, v) if u < v else (v, u)
            if e in exclude or e in chosen:
                continue
            chosen[e] = None
            if len(chosen) == m:
                break
    return list(chosen)


def gen_erdos_renyi(p: int, num_edges: int, seed) -> frozenset:
    """Uniformly random graph with exactly ``num_edges`` edges."""
    if num_edges > p * (p - 1) // 2 or num_edges < 0:
        raise GeneratorError(
            f"num_edges={num_edges} infeasible for p={p} (max {p * (p - 1) // 2})")
    rng = np.random.default_rng(seed)
    return frozenset(_sample_pairs(p, num_edges, rng))


def _hub_cluster(rng) -> list[Edge]:
    edges = set(_sample_pairs(97, 45, rng))
    for hub in range(97, 100):
        targets = rng.choice(hub, size=15, replace=False)
        edges.update((int(t), hub) for t in targets)
    return sorted(edges)


def _powerlaw_degrees(n, total, rng, exponent=2.3, kmax=30) -> np.ndarray:
    ks = np.arange(1, kmax + 1)
    prob = ks ** -exponent
    prob /= prob.sum()
    deg = rng.choice(ks, size=n, p=prob)
    # nudge random nodes until the stub count matches
    while deg.sum() != total:
        i = rng.integers(n)
        if deg.sum() < total and deg[i] < kmax:
            deg[i] += 1
        elif deg.sum() > total and deg[i] > 1:
            deg[i] -= 1
    return deg


def _match_stubs(deg, rng, max_tries=200) -> list[Edge] | None:
    for _ in range(max_tries):
        stubs = list(np.repeat(np.arange(deg.size), deg))
        edges: set[Edge] = set()
        ok = True
        while stubs:
            for _ in range(50):
                a, b = rng.choice(len(stubs), size=2, replace=False)
                u, v = stubs[a], stubs[b]
                e = (min(u, v), max(u, v))
                if u != v and e not in edges:
                    break
            else:
                ok = False
                break
            edges.add((int(e[0]), int(e[1])))
            for k in sorted((a, b), reverse=True):
                stubs.pop(k)
        if ok:
            return sorted(edges)
    return None


def _scalefree_cluster(rng, n=100, m=90) -> list[Edge]:
    for _ in range(100):
        deg = _powerlaw_degrees(n, 2 * m, rng)
        edges = _match_stubs(deg, rng)
        if edges is not None:
            return edges
    raise GeneratorError("could not realize a scale-free degree sequence")


HUB = "hub"
SCALEFREE = "scalefree"


def gen_cluster_graph(kind: str, seed, n_clusters: int = 10,
                      cluster_size: int = 100, inter_edges: int = 100) -> frozenset:
    """Ten 100-node clusters of 90 edges each, plus 100 edges joining
    cyclically adjacent clusters (10 per adjacent pair).

    ``kind="hub"`` builds each cluster from a 97-node, 45-edge random graph
    and three hubs attached to 15 random earlier nodes each.
    ``kind="scalefree"`` draws a degree sequence with ``P(k) ~ k^-2.3`` on
    ``[1, 30]`` and realizes it by stub matching.
    """
    if kind not in (HUB, SCALEFREE):
        raise GeneratorError(f"unknown cluster kind {kind!r}")
    rng = np.random.default_rng(seed)
    edges: set[Edge] = set()
    for c in range(n_clusters):
        local = _hub_cluster(rng) if kind == HUB else _scalefree_cluster(rng)
        if kind == HUB:
            # shuffle so hubs are not always the last three nodes
            perm = rng.permutation(cluster_size)
            local = [(int(perm[u]), int(perm[v])) for u, v in local]
        off = c * cluster_size
        edges.update((min(u, v) + off, max(u, v) + off) for u, v in local)
    per_pair, extra = divmod(inter_edges, n_clusters)
    for c in range(n_clusters):
        d = (c + 1) % n_clusters
        want = per_pair + (1 if c < extra else 0)
        got = 0
        while got < want:
            u = int(rng.integers(cluster_size)) + c * cluster_size
            v = int(rng.integers(cluster_size)) + d * cluster_size
            e = (min(u, v), max(u, v))
            if e not in edges:
                edges.add(e)
                got += 1
    return frozenset(edges)


# -- precision matrices ------------------------------------------------------

def build_dominant_precision(edges, p: int, seed) -> GraphModel:
    """Diagonally dominant precision matrix on ``edges``.

    Weights are uniform on [0.5, 1] with random sign; the weighted adjacency
    is added to its transpose, the diagonal set to 1.5 times the absolute
    row sums (1 for isolated nodes), the matrix scaled to unit diagonal and
    finally rescaled by a random diagonal with entries uniform on
    ``[1, sqrt(3)]``.
    """
    edges = sorted(edges)
    if not edges:
        raise GeneratorError("edge set is empty")
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.5, 1.0, size=len(edges))
    w *= np.where(rng.random(len(edges)) < 0.5, -1.0, 1.0)
    sym = _from_edges(p, edges, w, 0.0)
    a = sym + sym.T
    rowsum = np.asarray(abs(a).sum(axis=1)).ravel()
    diag = np.where(rowsum > 0, 1.5 * rowsum, 1.0)
    a = as_sparse_square(a + sp.diags_array(diag))
    scale = 1.0 / np.sqrt(diag)
    unit = _sym_scale(a, scale)
    unit.setdiag(1.0)
    final = _sym_scale(unit, rng.uniform(1.0, math.sqrt(3.0), size=p))
    meta = {"kind": "dominant", "p": p, "seed": seed, "num_edges": len(edges)}
    return graph_model(final, meta)


def _sym_scale(a, scale) -> sp.csr_array:
    """``diag(scale) @ a @ diag(scale)`` keeping exact symmetry."""
    a = sp.csr_array(a, copy=True)
    rows = np.repeat(np.arange(a.shape[0]), np.diff(a.indptr))
    # s_i * s_j first: that product is commutative, so both triangles agree exactly
    a.data = a.data * (scale[rows] * scale[a.indices])
    return a


def _min_eigpair(theta, v0=None):
    if theta.shape[0] <= 64:
        w, v = scipy.linalg.eigh(theta.toarray(), subset_by_index=[0, 0])
        return float(w[0]), v[:, 0]
    w, v = spla.eigsh(theta, k=1, which="SA", v0=v0, tol=1e-10)
    return float(w[0]), v[:, 0]


def build_bounded_precision(edges, p: int, seed, weight_range=(0.1, 0.3),
                            min_eig: float = 0.2, floor: float = 0.1,
                            shrink: float = 0.95, focus: float = 0.1,
                            max_rounds: int = 500) -> GraphModel:
    """Unit-diagonal matrix with off-diagonal magnitudes at least ``floor``
    and smallest eigenvalue at least ``min_eig``.

    Magnitudes are drawn uniformly from ``weight_range`` with random signs.
    While the eigenvalue bound fails, the edges carrying the offending
    eigenvector ``v`` (those with ``|v_i v_j|`` at least ``focus`` times the
    largest such product) are pulled toward the floor by
    ``m <- floor + shrink * (m - floor)``. After ``max_rounds`` every
    magnitude is set to the floor; if the bound still fails,
    :class:`GeneratorError` is raised.
    """
    edges = sorted(edges)
    if not edges:
        raise GeneratorError("edge set is empty")
    if p > EIG_CHECK_CAP:
        raise GeneratorError(f"p={p} too large for the eigenvalue check")
    rng = np.random.default_rng(seed)
    lo, hi = weight_range
    mag = rng.uniform(lo, hi, size=len(edges))
    sign = np.where(rng.random(len(edges)) < 0.5, -1.0, 1.0)
    ii = np.array([e[0] for e in edges])
    jj = np.array([e[1] for e in edges])
    vec = None
    for rounds in range(max_rounds):
        theta = _from_edges(p, edges, sign * mag, 1.0)
        achieved, vec = _min_eigpair(theta, vec)
        if achieved >= min_eig:
            break
        load = np.abs(vec[ii] * vec[jj])
        hit = load >= focus * load.max()
        mag[hit] = floor + shrink * (mag[hit] - floor)
    else:
        mag = np.full_like(mag, floor)
        theta = _from_edges(p, edges, sign * mag, 1.0)
    achieved = _min_eig(theta)
    if achieved < min_eig:
        raise GeneratorError(
            f"min eigenvalue {achieved:.4f} < {min_eig} with magnitudes down to {floor}")
    meta = {"kind": "bounded", "p": p, "seed": seed, "num_edges": len(edges),
            "min_eigenvalue": achieved, "shrink_rounds": rounds}
    return graph_model(theta, meta, check=False)


def gen_chain(p: int, rho: float) -> GraphModel:
    """Tridiagonal ``theta`` with unit diagonal and ``rho`` next to it."""
    if rho < 0 or rho > 0.5:
        raise GeneratorError(f"rho must lie in [0, 0.5], got {rho}")
    if rho == 0.5:
        warnings.warn("rho=0.5 is nearly singular (min eigenvalue 1 - cos(pi/(p+1)))",
                      stacklevel=2)
    off = np.full(p - 1, rho)
    theta = as_sparse_square(sp.diags_array([off, np.ones(p), off], offsets=[-1, 0, 1]))
    lo = 1.0 - 2.0 * rho * math.cos(math.pi / (p + 1))
    meta = {"kind": "chain", "p": p, "rho": rho, "min_eigenvalue": lo}
    return graph_model(theta, meta, check=False)


def gen_star(p: int, d: int) -> GraphModel:
    """Hub node 0 joined to nodes ``1..d-1`` with weight ``2.5/(d-1)``."""
    if d < 8:
        raise GeneratorError(
            f"d={d} < 8: the star is positive definite only when "
            f"2.5/sqrt(d-1) < 1, i.e. d - 1 > 6.25")
    if p < d:
        raise GeneratorError(f"p={p} must be at least d={d}")
    a = 2.5 / (d - 1)
    edges = [(0, k) for k in range(1, d)]
    theta = _from_edges(p, edges, np.full(d - 1, a), 1.0)
    lo = 1.0 - a * math.sqrt(d - 1)
    meta = {"kind": "star", "p": p, "d": d, "min_eigenvalue": lo}
    return graph_model(theta, meta, check=False)


# -- triangular factor sampler ----------------------------------------------

@dataclass(frozen=True)
class TriangularFactor:
    """Sparse unit lower-triangular ``L``; the precision is ``L @ L.T``."""

    L: sp.csr_array
    seed: object = None

    def __post_init__(self):
        L = self.L
        if np.any(L.diagonal() != 1.0) or sp.triu(L, k=1).nnz:
            raise ValueError("L must be unit lower triangular")
        off = sp.tril(L, k=-1)
        if off.nnz and np.abs(off.data).max() > 1.0:
            raise ValueError("off-diagonal entries must lie in [-1, 1]")

    @property
    def p(self) -> int:
        return self.L.shape[0]

    def precision(self) -> sp.csr_array:
        return as_sparse_square(self.L @ self.L.T)


def _lower_positions(p, m, rng) -> tuple[np.ndarray, np.ndarray]:
    """``m`` distinct strictly-lower positions in random order."""
    total = p * (p - 1) // 2
    m = min(m, total)
    if total <= 4 * m or total < 1 << 20:
        keys = rng.permutation(total)[:m]
    else:
        seen: dict[int, None] = {}
        while len(seen) < m:
            for k in rng.integers(0, total, size=m - len(seen) + 16).tolist():
                seen.setdefault(k, None)
                if len(seen) == m:
                    break
        keys = np.fromiter(seen, dtype=np.int64, count=m)
    # key k -> row i >= 1, col j < i with k = i(i-1)/2 + j
    i = ((1 + np.sqrt(1 + 8 * keys.astype(np.float64))) // 2).astype(np.int64)
    i = np.where(i * (i - 1) // 2 > keys, i - 1, i)
    i = np.where((i + 1) * i // 2 <= keys, i + 1, i)
    j = keys - i * (i - 1) // 2
    return i, j


def _avg_degree(p, rows, cols) -> float:
    L = sp.csr_array((np.ones(rows.size + p), (np.concatenate([rows, np.arange(p)]),
                                               np.concatenate([cols, np.arange(p)]))),
                     shape=(p, p))
    pattern = L @ L.T
    return (pattern.nnz - p) / p


def gen_cholesky_factor(p: int, avg_degree: float, seed, eps: float = 0.05) -> TriangularFactor:
    """Random unit lower-triangular factor whose ``L @ L.T`` has the target
    average degree.

    Positions are a uniformly random prefix of the strictly-lower
    triangle; the prefix length is found by bisection on the measured
    degree. Values are uniform on ``[-1, -eps] U [eps, 1]``.
    """
    if p < 2:
        raise GeneratorError("p must be at least 2")
    rng = np.random.default_rng(seed)
    hi = min(int(math.ceil(avg_degree * p / 2)) + 1, p * (p - 1) // 2)
    rows, cols = _lower_positions(p, hi, rng)
    mags = rng.uniform(eps, 1.0, size=rows.size)
    signs = np.where(rng.random(rows.size) < 0.5, -1.0, 1.0)

    lo_m, hi_m = 0, rows.size
    while lo_m < hi_m:
        mid = (lo_m + hi_m) // 2
        if _avg_degree(p, rows[:mid], cols[:mid]) < avg_degree:
            lo_m = mid + 1
        else:
            hi_m = mid
    m = lo_m
    if m > 0 and abs(_avg_degree(p, rows[:m - 1], cols[:m - 1]) - avg_degree) <= \
            abs(_avg_degree(p, rows[:m], cols[:m]) - avg_degree):
        m -= 1
    vals = np.concatenate([mags[:m] * signs[:m], np.ones(p)])
    L = sp.csr_array((vals, (np.concatenate([rows[:m], np.arange(p)]),
                             np.concatenate([cols[:m], np.arange(p)]))), shape=(p, p))
    L.sort_indices()
    return TriangularFactor(L, seed)


def sample_from_factor(factor: TriangularFactor, n: int, seed) -> DenseData:
    """``n`` draws of ``L^-T z``, ``z ~ N(0, I)``, by back substitution."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((factor.p, n))
    upper = sp.csr_array(factor.L.T)
    # SuperLU's triangular solve requires C-int index arrays
    upper.indices = upper.indices.astype(np.intc)
    upper.indptr = upper.indptr.astype(np.intc)
    y = spla.spsolve_triangular(upper, z, lower=False, unit_diagonal=True)
    return center_columns(np.asarray(y).T)


def sample_gaussian(theta, n: int, seed, dense_cap: int = DENSE_CAP) -> DenseData:
    """``n`` draws from ``N(0, theta^-1)`` via the Cholesky factor of ``theta``."""
    theta = sp.csr_array(theta)
    p = theta.shape[0]
    if p > dense_cap:
        raise GeneratorError(f"p={p} exceeds dense_cap={dense_cap}")
    try:
        c = scipy.linalg.cholesky(theta.toarray(), lower=True)
    except np.linalg.LinAlgError as exc:
        raise GeneratorError("theta is not positive definite") from exc
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((p, n))
    # theta = C C^T, so C^-T z has covariance theta^-1
    y = scipy.linalg.solve_triangular(c, z, lower=True, trans="T")
    return center_columns(y.T)
