"""MAP sparse Cholesky factors, implied covariances and median correlations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from .errors import InvalidArgumentError, NumericalFailureError, ResourceError
from .marginal_likelihood import ClusterParams, MomentCache, NeighborRule, spot_stats

DEFAULT_DENSE_CAP = 6000


@dataclass(frozen=True)
class CholeskyFactors:
    """Factors of ``U' Sigma U = D`` in maximin position order.

    ``neighbors[p]`` lists the earlier positions with a nonzero in column
    ``p`` of ``U`` and ``u[p]`` holds those entries. ``order`` maps positions
    back to the original spot indices.
    """

    neighbors: list
    u: list
    d: np.ndarray
    order: np.ndarray

    def __post_init__(self):
        if not np.all(self.d > 0):
            raise InvalidArgumentError("conditional variances must be positive")

    @property
    def n(self) -> int:
        return len(self.d)

    def u_matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [np.arange(self.n)], [np.arange(self.n)], [np.ones(self.n)]
        for p, (nb, up) in enumerate(zip(self.neighbors, self.u)):
            rows.append(np.asarray(nb, dtype=np.int64))
            cols.append(np.full(len(nb), p, dtype=np.int64))
            vals.append(np.asarray(up, dtype=float))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n, self.n))


def map_cholesky(cache: MomentCache, params: ClusterParams, rule: NeighborRule = NeighborRule(),
                 variance: str = "mode") -> CholeskyFactors:
    """Conditional-modal ``(u, d)`` of every spot given the cluster's members.

    ``u_p = -G_p s_p`` (posterior mean of the coefficients given ``d_p``,
    with ``s_p`` the centered cross sums) and ``d_p = beta~/(alpha~ + 1)``,
    the inverse-gamma mode; ``variance="mean"`` uses ``beta~/(alpha~ - 1)``.
    """
    if cache.N < 1:
        raise InvalidArgumentError("cluster is empty")
    if variance not in ("mode", "mean"):
        raise InvalidArgumentError(f"variance must be 'mode' or 'mean', got {variance!r}")
    design = cache.design
    m = rule.m(params.theta.theta3)
    neighbors, us, ds = [], [], np.empty(design.n)
    for p in range(design.n):
        try:
            st = spot_stats(cache, p, params.mu, params.theta, m)
        except NumericalFailureError as exc:
            raise NumericalFailureError(f"position {p}: {exc}") from None
        k = len(st.sxy)
        neighbors.append(design.neighbors[p, :k].copy())
        us.append(-(st.G @ st.sxy))
        denom = st.alpha_tilde + 1.0 if variance == "mode" else st.alpha_tilde - 1.0
        ds[p] = st.beta_tilde / denom
    return CholeskyFactors(neighbors, us, ds, np.asarray(design.order).copy())


def covariance_from_factors(factors: CholeskyFactors, cap: int = DEFAULT_DENSE_CAP,
                            original_order: bool = True) -> np.ndarray:
    """Dense ``Sigma = U^{-T} D U^{-1}``, by default in original spot order."""
    n = factors.n
    if n > cap:
        raise ResourceError(f"dense {n}x{n} covariance exceeds the cap of {cap} spots")
    U = factors.u_matrix()
    W = spsolve_triangular(U, np.eye(n), lower=False)  # U^{-1}
    S = spsolve_triangular(U.T.tocsr(), factors.d[:, None] * W, lower=True)
    S = 0.5 * (S + S.T)
    if not original_order:
        return S
    out = np.empty_like(S)
    out[np.ix_(factors.order, factors.order)] = S
    return out


def correlation_summary(sigma) -> np.ndarray:
    """Per spot, the median absolute correlation with every other spot."""
    S = np.asarray(sigma, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidArgumentError("covariance must be square")
    n = S.shape[0]
    if n < 2:
        raise InvalidArgumentError("need at least two spots")
    v = np.diag(S)
    if not np.all(v > 0):
        raise InvalidArgumentError("covariance has a non-positive diagonal entry")
    s = 1.0 / np.sqrt(v)
    R = np.abs(S * s[:, None] * s[None, :])
    off = R[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    return np.median(off, axis=1)


def correlation_maps(Y, coords, labels, params, rule: NeighborRule, m_max: int | None = None,
                     variance: str = "mode", cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Median absolute correlation per spot (rows, original order) for each cluster (columns).

    Empty clusters yield a column of NaN.
    """
    from .spatial_order import SpatialDesign

    Y = np.asarray(Y, dtype=float)
    labels = np.asarray(labels)
    design = SpatialDesign.build(coords, m_max or rule.m_cap)
    Yo = np.ascontiguousarray(Y[:, design.order])
    out = np.full((design.n, len(params)), np.nan)
    for k, p in enumerate(params):
        rows = Yo[labels == k]
        if rows.shape[0] == 0:
            continue
        cache = MomentCache.from_rows(design, rows)
        sigma = covariance_from_factors(map_cholesky(cache, p, rule, variance), cap=cap)
        out[:, k] = correlation_summary(sigma)
    return out
