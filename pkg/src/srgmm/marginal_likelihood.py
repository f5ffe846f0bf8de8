"""Collapsed cluster likelihood and the log posterior traced by the sampler.

For cluster ``k`` the coefficients ``u_i`` and variances ``d_i`` of every
spot are integrated out analytically. Each spot contributes a multivariate
Student-t term that depends on the members only through centered moment
sums, so a cluster is summarized by a :class:`MomentCache` of raw sums that
can be updated one observation at a time.

All observation vectors handled here are in maximin *position* order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import kernels
from .errors import DegeneratePriorError, InvalidArgumentError, NumericalFailureError
from .hyperprior import (
    DEFAULT_M_CAP,
    DEFAULT_M_THRESHOLD,
    ThetaParams,
    select_neighbor_count,
    spot_prior,
)
from .spatial_order import SpatialDesign

LOG_2PI = math.log(2.0 * math.pi)
JITTER = 1e-10


@dataclass(frozen=True)
class NeighborRule:
    """Maps the decay hyperparameter to the neighbor count a cluster uses."""

    threshold: float = DEFAULT_M_THRESHOLD
    m_cap: int = DEFAULT_M_CAP

    def m(self, theta3: float) -> int:
        return select_neighbor_count(theta3, self.threshold, self.m_cap)


@dataclass(frozen=True)
class ClusterParams:
    mu: float
    theta: ThetaParams
    pi: float

    def __post_init__(self):
        if not 0.0 <= self.pi <= 1.0:
            raise InvalidArgumentError(f"mixture weight must lie in [0, 1], got {self.pi}")
        if not math.isfinite(self.mu):
            raise InvalidArgumentError(f"cluster mean must be finite, got {self.mu}")


@dataclass(frozen=True)
class PriorConfig:
    lam: float = 100.0
    xi: float = 4.0
    nu: tuple = (2.0, 2.0)

    def __post_init__(self):
        if not (self.lam > 0 and self.xi > 0 and all(v > 0 for v in self.nu)):
            raise InvalidArgumentError("prior hyperparameters must all be positive")

    def with_k(self, k: int) -> "PriorConfig":
        """Broadcast a single Dirichlet concentration to ``k`` clusters."""
        if len(self.nu) == k:
            return self
        if len(set(self.nu)) == 1:
            return PriorConfig(self.lam, self.xi, (float(self.nu[0]),) * k)
        raise InvalidArgumentError(f"nu has {len(self.nu)} entries, need {k}")


@dataclass
class MomentCache:
    """Raw sums over the members of one cluster, per maximin position.

    ``Sx``/``Sxy``/``Sxx`` are stored at the design's full neighbor width;
    evaluations slice the leading block for the cluster's neighbor count.
    """

    design: SpatialDesign
    N: int = 0
    Sy: np.ndarray = field(default=None, repr=False)
    Syy: np.ndarray = field(default=None, repr=False)
    Sx: np.ndarray = field(default=None, repr=False)
    Sxy: np.ndarray = field(default=None, repr=False)
    Sxx: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        n, w = self.design.n, self.design.width
        if self.Sy is None:
            self.Sy = np.zeros(n)
            self.Syy = np.zeros(n)
            self.Sx = np.zeros((n, w))
            self.Sxy = np.zeros((n, w))
            self.Sxx = np.zeros((n, w, w))

    def _update(self, y, weight, backend):
        y = np.ascontiguousarray(y, dtype=float)
        if y.shape != (self.design.n,):
            raise InvalidArgumentError(f"observation must have length {self.design.n}, got {y.shape}")
        kernels.get_backend(backend).cache_update(
            self.Sy, self.Syy, self.Sx, self.Sxy, self.Sxx,
            self.design.neighbors, self.design.counts, y, float(weight))
        self.N += int(weight)

    def add(self, y, backend=None):
        self._update(y, 1.0, backend)

    def remove(self, y, backend=None):
        if self.N <= 0:
            raise InvalidArgumentError("cannot remove from an empty cache")
        self._update(y, -1.0, backend)

    def copy(self) -> "MomentCache":
        return MomentCache(self.design, self.N, self.Sy.copy(), self.Syy.copy(),
                           self.Sx.copy(), self.Sxy.copy(), self.Sxx.copy())

    @classmethod
    def from_rows(cls, design: SpatialDesign, rows, backend=None) -> "MomentCache":
        cache = cls(design)
        for y in np.asarray(rows, dtype=float).reshape(-1, design.n):
            cache.add(y, backend)
        return cache


@dataclass(frozen=True)
class SpotPosteriorStats:
    G: np.ndarray
    alpha_tilde: float
    beta_tilde: float
    logdet_G: float
    logdet_V: float
    sxy: np.ndarray  # centered cross sums with the neighbors
    alpha: float
    beta: float

    @property
    def log_term(self) -> float:
        """This spot's contribution to the collapsed log likelihood."""
        n_k = 2.0 * (self.alpha_tilde - self.alpha)
        return (0.5 * self.logdet_G - 0.5 * self.logdet_V + self.alpha * math.log(self.beta)
                - self.alpha_tilde * math.log(self.beta_tilde)
                + gammaln(self.alpha_tilde) - gammaln(self.alpha) - 0.5 * n_k * LOG_2PI)


def _chol_with_jitter(A):
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        m = A.shape[0]
        B = A + np.eye(m) * (JITTER * np.trace(A) / m)
        try:
            return np.linalg.cholesky(B)
        except np.linalg.LinAlgError:
            raise NumericalFailureError("spot precision block is not positive definite") from None


def spot_stats(cache: MomentCache, p: int, mu: float, theta: ThetaParams, m_k: int) -> SpotPosteriorStats:
    """Posterior normal-inverse-gamma quantities at maximin position ``p``."""
    if m_k > cache.design.width and cache.design.width < cache.design.n - 1:
        raise InvalidArgumentError("neighbor count exceeds the cached width")
    m = int(min(m_k, cache.design.counts[p]))
    prior = spot_prior(theta, p + 1, m)
    N = cache.N
    mu2N = N * mu * mu
    syy = cache.Syy[p] - 2.0 * mu * cache.Sy[p] + mu2N
    sx = cache.Sx[p, :m]
    sxy = cache.Sxy[p, :m] - mu * sx - mu * cache.Sy[p] + mu2N
    sxx = cache.Sxx[p, :m, :m] - mu * (sx[:, None] + sx[None, :]) + mu2N
    logdet_V = float(np.sum(np.log(prior.v_diag)))
    if m:
        L = _chol_with_jitter(sxx + np.diag(1.0 / prior.v_diag))
        Linv = np.linalg.solve(L, np.eye(m))
        G = Linv.T @ Linv
        z = Linv @ sxy
        quad = float(z @ z)
        logdet_G = -2.0 * float(np.sum(np.log(np.diag(L))))
    else:
        G = np.zeros((0, 0))
        quad = 0.0
        logdet_G = 0.0
    return SpotPosteriorStats(
        G=G, alpha_tilde=prior.alpha + N / 2.0, beta_tilde=prior.beta + 0.5 * (syy - quad),
        logdet_G=logdet_G, logdet_V=logdet_V, sxy=sxy, alpha=prior.alpha, beta=prior.beta)


def cluster_log_marginal(cache: MomentCache, params: ClusterParams, rule: NeighborRule = NeighborRule(),
                         m: int | None = None, extra=None, weight: float = 0.0, backend=None) -> float:
    """Exact log collapsed likelihood of a cluster, weight term included.

    ``extra``/``weight`` evaluate the cache as if observation ``extra`` had
    been added (``+1``) or removed (``-1``) without mutating it. ``m``
    overrides the neighbor count implied by ``params.theta.theta3``.
    Returns ``-inf`` when the weight is zero for a non-empty cluster or a
    factorization fails.
    """
    n_eff = cache.N + weight
    if n_eff < 0:
        raise InvalidArgumentError("cannot remove from an empty cache")
    if n_eff == 0:
        return 0.0
    if params.pi <= 0.0:
        return -math.inf
    if m is None:
        m = rule.m(params.theta.theta3)
    if extra is None:
        extra = cache.Sy  # unused when weight == 0
        weight = 0.0
    else:
        extra = np.ascontiguousarray(extra, dtype=float)
    th = params.theta
    try:
        ll = kernels.get_backend(backend).cluster_loglik(
            cache.Sy, cache.Syy, cache.Sx, cache.Sxy, cache.Sxx, float(cache.N),
            cache.design.neighbors, cache.design.counts, float(params.mu),
            th.theta1, th.theta2, th.theta3, int(m), extra, float(weight))
    except ValueError as exc:
        raise DegeneratePriorError(str(exc)) from None
    if not math.isfinite(ll):
        return -math.inf
    return n_eff * math.log(params.pi) + ll


def log_prior(params: ClusterParams, prior: PriorConfig) -> float:
    """Gaussian prior on the mean plus independent log-normal priors on theta."""
    lp = -0.5 * math.log(2.0 * math.pi * prior.lam) - params.mu ** 2 / (2.0 * prior.lam)
    for t in params.theta.as_array():
        lt = math.log(t)
        lp += -lt - 0.5 * math.log(2.0 * math.pi * prior.xi) - lt * lt / (2.0 * prior.xi)
    return lp


def log_dirichlet(pi, nu) -> float:
    pi = np.asarray(pi, dtype=float)
    nu = np.asarray(nu, dtype=float)
    out = float(gammaln(nu.sum()) - gammaln(nu).sum())
    for p, a in zip(pi, nu):
        if a != 1.0:
            if p <= 0.0:
                return -math.inf if a > 1.0 else math.inf
            out += (a - 1.0) * math.log(p)
    return out


def log_posterior(caches, all_params, prior: PriorConfig, rule: NeighborRule = NeighborRule(),
                  backend=None) -> float:
    """Sum of collapsed cluster likelihoods, parameter priors and the Dirichlet term."""
    if len(caches) != len(all_params):
        raise InvalidArgumentError("one cache per cluster is required")
    prior = prior.with_k(len(all_params))
    total = 0.0
    for cache, params in zip(caches, all_params):
        total += cluster_log_marginal(cache, params, rule, backend=backend) + log_prior(params, prior)
    return total + log_dirichlet([p.pi for p in all_params], prior.nu)
