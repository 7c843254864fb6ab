import math

import numpy as np
import pytest
import scipy.sparse as sp

from accord.sim import (
    GeneratorError,
    TriangularFactor,
    build_bounded_precision,
    build_dominant_precision,
    gen_chain,
    gen_cholesky_factor,
    gen_cluster_graph,
    gen_erdos_renyi,
    gen_star,
    graph_model,
    sample_from_factor,
    sample_gaussian,
)


def test_erdos_renyi_exact_count_and_seeded():
    e = gen_erdos_renyi(50, 200, seed=1)
    assert len(e) == 200
    assert all(0 <= i < j < 50 for i, j in e)
    assert e == gen_erdos_renyi(50, 200, seed=1)
    assert e != gen_erdos_renyi(50, 200, seed=2)


def test_erdos_renyi_dense_and_infeasible():
    assert len(gen_erdos_renyi(10, 45, 0)) == 45
    with pytest.raises(GeneratorError, match="infeasible"):
        gen_erdos_renyi(10, 46, 0)


@pytest.mark.parametrize("kind", ["hub", "scalefree"])
def test_cluster_graph_shape(kind):
    e = gen_cluster_graph(kind, seed=0)
    assert len(e) == 10 * 90 + 100
    within = [(i, j) for i, j in e if i // 100 == j // 100]
    assert len(within) == 900
    for i, j in set(e) - set(within):
        assert (j // 100 - i // 100) % 10 in (1, 9)


def test_hub_cluster_has_three_hubs():
    e = gen_cluster_graph("hub", seed=3)
    deg = np.zeros(1000, dtype=int)
    for i, j in e:
        deg[i] += 1
        deg[j] += 1
    for c in range(10):
        top = np.sort(deg[c * 100:(c + 1) * 100])[-3:]
        assert np.all(top >= 15)


def test_cluster_graph_rejects_kind():
    with pytest.raises(GeneratorError):
        gen_cluster_graph("ring", seed=0)


def test_dominant_precision_properties():
    e = gen_erdos_renyi(60, 150, seed=4)
    gm = build_dominant_precision(e, 60, seed=5)
    th = gm.theta_true.toarray()
    assert np.array_equal(th, th.T)
    assert gm.edges == frozenset(e)
    d = np.diag(th)
    assert np.all(d >= 1.0) and np.all(d <= 3.0 + 1e-12)
    assert np.linalg.eigvalsh(th)[0] > 0
    # the unit-diagonal form is similar to a matrix with Gershgorin radii 2/3
    unit = th / np.sqrt(np.outer(d, d))
    eig = np.linalg.eigvalsh(unit)
    assert eig[0] >= 1 / 3 - 1e-12 and eig[-1] <= 5 / 3 + 1e-12


def test_bounded_precision_hub_meets_eigen_bound():
    e = gen_cluster_graph("hub", seed=0)
    gm = build_bounded_precision(e, 1000, seed=0)
    assert gm.min_eigenvalue >= 0.2
    off = sp.triu(gm.theta_true, k=1)
    mags = np.abs(off.data)
    assert mags.min() >= 0.1 - 1e-12 and mags.max() <= 0.3
    assert off.nnz == len(e)
    assert np.all(gm.theta_true.diagonal() == 1.0)


def test_bounded_precision_fails_loudly_when_impossible():
    # a 30-node complete graph has min eigenvalue 1 - 29*0.1 < 0 at the floor
    e = [(i, j) for i in range(30) for j in range(i + 1, 30)]
    with pytest.raises(GeneratorError, match="min eigenvalue"):
        build_bounded_precision(e, 30, seed=0, max_rounds=20)


def test_chain_structure_and_eigenvalue():
    gm = gen_chain(6, 0.3)
    th = gm.theta_true.toarray()
    assert th[0, 1] == 0.3 and th[0, 2] == 0 and th[3, 3] == 1
    assert gm.min_eigenvalue == pytest.approx(np.linalg.eigvalsh(th)[0], abs=1e-12)
    assert gm.max_degree == 2


def test_chain_boundaries():
    with pytest.raises(GeneratorError):
        gen_chain(5, 0.6)
    with pytest.warns(UserWarning):
        gm = gen_chain(20, 0.5)
    assert gm.min_eigenvalue > 0


def test_star_structure():
    gm = gen_star(30, 11)
    th = gm.theta_true.toarray()
    assert th[0, 1] == pytest.approx(0.25)
    assert gm.max_degree == 10
    assert gm.min_eigenvalue == pytest.approx(np.linalg.eigvalsh(th)[0], abs=1e-12)
    with pytest.raises(GeneratorError, match="positive definite"):
        gen_star(30, 7)


def test_graph_model_rejects_bad_theta():
    with pytest.raises(GeneratorError, match="symmetric"):
        graph_model(np.array([[1.0, 0.1], [0.2, 1.0]]))
    with pytest.raises(GeneratorError, match="positive definite"):
        graph_model(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_graph_model_omega_is_transform():
    gm = gen_chain(5, 0.2)
    np.testing.assert_allclose(gm.omega_true.toarray(), gm.theta_true.toarray())
    assert gm.support == gm.edges | {(j, i) for i, j in gm.edges}


def test_cholesky_factor_degree_and_validity():
    f = gen_cholesky_factor(400, 5.0, seed=1)
    prec = f.precision()
    deg = (prec.nnz - 400) / 400
    assert abs(deg - 5.0) < 0.1
    off = sp.tril(f.L, k=-1).data
    assert np.all((np.abs(off) >= 0.05) & (np.abs(off) <= 1))


def test_triangular_factor_validation():
    with pytest.raises(ValueError):
        TriangularFactor(sp.csr_array(np.array([[1.0, 0.5], [0.0, 1.0]])))
    with pytest.raises(ValueError):
        TriangularFactor(sp.csr_array(np.array([[1.0, 0.0], [2.0, 1.0]])))


def test_sample_from_factor_covariance_small():
    L = sp.csr_array(np.array([[1.0, 0.0], [0.5, 1.0]]))
    data = sample_from_factor(TriangularFactor(L), 200000, seed=0)
    cov = data.values.T @ data.values / data.n
    expect = np.linalg.inv(L.toarray() @ L.toarray().T)
    assert np.linalg.norm(cov - expect) / np.linalg.norm(expect) < 0.02


def test_sample_gaussian_seeded_and_centered():
    gm = gen_chain(8, 0.3)
    a = sample_gaussian(gm.theta_true, 100, seed=3)
    b = sample_gaussian(gm.theta_true, 100, seed=3)
    assert np.array_equal(a.values, b.values)
    assert np.abs(a.values.sum(axis=0)).max() < 1e-12


def test_sample_gaussian_covariance():
    gm = gen_chain(6, 0.4)
    d = sample_gaussian(gm.theta_true, 200000, seed=1)
    cov = d.values.T @ d.values / d.n
    expect = np.linalg.inv(gm.theta_true.toarray())
    assert np.linalg.norm(cov - expect) / np.linalg.norm(expect) < 0.02


def test_sample_gaussian_rejects_indefinite():
    with pytest.raises(GeneratorError):
        sample_gaussian(sp.csr_array(np.array([[1.0, 2.0], [2.0, 1.0]])), 5, seed=0)


def test_star_min_eigenvalue_formula():
    for d in (8, 11, 21, 41):
        assert gen_star(60, d).min_eigenvalue == pytest.approx(1 - 2.5 / math.sqrt(d - 1))


def test_bounded_precision_small_chain_accepted_unchanged():
    gm = build_bounded_precision([(0, 1), (1, 2)], 3, seed=0, weight_range=(0.1, 0.1))
    assert gm.min_eigenvalue == pytest.approx(1 - 0.1 * math.sqrt(2), abs=1e-12)
    assert gm.generator["shrink_rounds"] == 0
