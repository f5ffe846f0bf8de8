import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srgmm.errors import InvalidArgumentError, ResourceError
from srgmm.hyperprior import ThetaParams
from srgmm.marginal_likelihood import ClusterParams, MomentCache, NeighborRule
from srgmm.posterior import (
    CholeskyFactors,
    correlation_maps,
    correlation_summary,
    covariance_from_factors,
    map_cholesky,
)
from srgmm.spatial_order import SpatialDesign
from srgmm.synthetic import KernelSpec, kernel_matrix


def random_factors(rng, n, width=5):
    nbs, us = [], []
    for p in range(n):
        k = min(p, width)
        nbs.append(np.sort(rng.choice(p, size=k, replace=False)) if k else np.empty(0, dtype=np.int64))
        us.append(rng.normal(0, 0.4, k))
    return CholeskyFactors(nbs, us, rng.uniform(0.2, 2.0, n), rng.permutation(n))


def test_map_variance_single_spot():
    design = SpatialDesign.build([(0.0, 0.0)], m_max=1)
    cache = MomentCache.from_rows(design, [[0.0], [0.0]])
    params = ClusterParams(0.0, ThetaParams(1, 2, 1), 1.0)
    f = map_cholesky(cache, params)
    assert f.d[0] == pytest.approx(0.540415, abs=1e-6)
    g = map_cholesky(cache, params, variance="mean")
    assert g.d[0] == pytest.approx(5 * (1 - np.exp(-2)) / 6)
    with pytest.raises(InvalidArgumentError):
        map_cholesky(cache, params, variance="median")


def test_u_zero_for_constant_data(rng):
    design = SpatialDesign.build(rng.uniform(0, 4, (8, 2)))
    cache = MomentCache.from_rows(design, np.full((3, 8), 0.7))
    f = map_cholesky(cache, ClusterParams(0.7, ThetaParams(1, 1, 0.5), 1.0))
    assert all(np.all(u == 0) for u in f.u)


def test_u_converges_to_regression_coefficients():
    rng = np.random.default_rng(7)
    n = 10
    coords = rng.uniform(0, 3, (n, 2))
    design = SpatialDesign.build(coords, m_max=n)
    K = kernel_matrix(coords, KernelSpec("exponential", 1.0, 1.5, 0.05))
    Y = rng.multivariate_normal(np.zeros(n), K, size=5000)
    cache = MomentCache.from_rows(design, Y[:, design.order])
    rule = NeighborRule(threshold=1e-3, m_cap=n)
    f = map_cholesky(cache, ClusterParams(0.0, ThetaParams(1.0, 1.0, 0.1), 1.0), rule)
    Ko = K[np.ix_(design.order, design.order)]
    est, true = [], []
    for p in range(1, n):
        nb = f.neighbors[p]
        assert len(nb) == p
        true.append(np.linalg.solve(Ko[np.ix_(nb, nb)], Ko[nb, p]))
        # U' Sigma U = D puts the coefficients in U with the opposite sign
        est.append(-f.u[p])
    est, true = np.concatenate(est), np.concatenate(true)
    # relative error over all coefficients; single small ones carry ~0.015 sampling noise
    assert np.linalg.norm(est - true) <= 0.05 * np.linalg.norm(true)
    assert np.corrcoef(est, true)[0, 1] > 0.99


def test_covariance_examples():
    f = CholeskyFactors([np.empty(0, int), np.array([0])], [np.empty(0), np.array([0.5])],
                        np.array([1.0, 1.0]), np.array([0, 1]))
    np.testing.assert_allclose(covariance_from_factors(f), [[1, -0.5], [-0.5, 1.25]], atol=1e-14)
    d = np.array([0.5, 2.0, 3.0])
    ident = CholeskyFactors([np.empty(0, int)] * 3, [np.empty(0)] * 3, d, np.array([2, 0, 1]))
    np.testing.assert_allclose(covariance_from_factors(ident, original_order=False), np.diag(d))
    # position p holds original spot order[p]
    np.testing.assert_allclose(np.diag(covariance_from_factors(ident)), [2.0, 3.0, 0.5])


@pytest.mark.parametrize("n", [2, 17, 80, 200])
def test_round_trip(n):
    rng = np.random.default_rng(n)
    f = random_factors(rng, n)
    S = covariance_from_factors(f, original_order=False)
    U = f.u_matrix().toarray()
    D = U.T @ S @ U
    assert np.linalg.norm(D - np.diag(f.d)) <= 1e-6 * np.linalg.norm(f.d)
    assert np.allclose(S, S.T, atol=1e-9)
    assert np.linalg.eigvalsh(S).min() > 0


def test_dense_cap(rng):
    with pytest.raises(ResourceError):
        covariance_from_factors(random_factors(rng, 30), cap=20)


def test_correlation_examples():
    assert np.all(correlation_summary(np.eye(5)) == 0)
    R = np.array([[1.0, 0.8, -0.2], [0.8, 1.0, 0.1], [-0.2, 0.1, 1.0]])
    assert correlation_summary(R)[0] == pytest.approx(0.5)
    with pytest.raises(InvalidArgumentError):
        correlation_summary(np.eye(1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 30), st.floats(1e-3, 1e3))
def test_correlation_bounds_and_scale_invariance(seed, n, c):
    rng = np.random.default_rng(seed)
    S = covariance_from_factors(random_factors(rng, n))
    rho = correlation_summary(S)
    assert np.all((rho >= 0) & (rho <= 1 + 1e-12))
    np.testing.assert_allclose(correlation_summary(c * S), rho, atol=1e-12)


def test_rho_roughly_uniform_for_stationary_data():
    rng = np.random.default_rng(3)
    n = 200
    coords = rng.uniform(0, 10, (n, 2))
    K = kernel_matrix(coords, KernelSpec("exponential", 2.0, 1.0))
    L = np.linalg.cholesky(K + 1e-10 * np.eye(n))
    Y = (L @ rng.standard_normal((n, 500))).T
    params = [ClusterParams(0.0, ThetaParams(2.0, 1.0, 0.5), 1.0)]
    rho = correlation_maps(Y, coords, np.zeros(500, dtype=int), params, NeighborRule())[:, 0]
    interior = np.all((coords > 2) & (coords < 8), axis=1)
    cv = rho[interior].std() / rho[interior].mean()
    assert cv < 0.3


def test_correlation_maps_empty_cluster(rng):
    coords = rng.uniform(0, 5, (12, 2))
    Y = rng.normal(size=(6, 12))
    params = [ClusterParams(0.0, ThetaParams(1, 1, 1), 0.9), ClusterParams(0.0, ThetaParams(1, 1, 1), 0.1)]
    out = correlation_maps(Y, coords, np.zeros(6, dtype=int), params, NeighborRule())
    assert np.all(np.isfinite(out[:, 0])) and np.all(np.isnan(out[:, 1]))
