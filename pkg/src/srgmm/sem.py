"""Stochastic EM with collapsed-Gibbs label updates.

One iteration is a sequential sweep over the observations, each label drawn
from its collapsed conditional given all other labels, followed by a MAP
update of every cluster's mean and hyperparameters (Nelder-Mead in
``(mu, log theta)``) and the modal Dirichlet update of the weights.
Independent restarts are run and the iterate with the largest log posterior
over all chains is returned.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidArgumentError, NumericalFailureError
from .hyperprior import ThetaParams
from .marginal_likelihood import (
    ClusterParams,
    MomentCache,
    NeighborRule,
    PriorConfig,
    cluster_log_marginal,
    log_posterior,
    log_prior,
)
from .spatial_order import SpatialDesign

log = logging.getLogger(__name__)

_LOG_THETA_BOUND = 30.0


@dataclass(frozen=True)
class FitConfig:
    k: int = 2
    restarts: int = 10
    max_iters: int = 200
    tol: float = 1e-4
    patience: int = 5
    seed: int = 0
    prior: PriorConfig = field(default_factory=PriorConfig)
    m_threshold: float = 1e-3
    m_cap: int = 50
    nm_max_evals: int = 400
    nm_tol: float = 1e-6
    shuffle: bool = False
    threads: int = 1
    backend: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgumentError("K must be >= 1")
        for name in ("restarts", "max_iters", "patience", "m_cap", "nm_max_evals", "threads"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        if not self.tol > 0 or not self.nm_tol > 0:
            raise InvalidArgumentError("tolerances must be positive")

    @property
    def rule(self) -> NeighborRule:
        return NeighborRule(self.m_threshold, self.m_cap)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prior"] = {"lambda": self.prior.lam, "xi": self.prior.xi, "nu": list(self.prior.nu)}
        return d


@dataclass
class AssignmentState:
    labels: np.ndarray
    k: int

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


@dataclass
class FitResult:
    labels: np.ndarray
    params: list
    log_posterior: float
    trace: list
    iterations_run: list
    seed: int
    config: FitConfig
    best_restart: int
    best_iteration: int
    diagnostics: dict = field(default_factory=dict)
    gene_ids: list | None = None

    @property
    def best_labels(self) -> AssignmentState:
        return AssignmentState(self.labels, len(self.params))

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(self.params))


def initialize(n_obs: int, k: int, rng: np.random.Generator) -> AssignmentState:
    """Uniform random labels, repaired so that no cluster is empty."""
    if k > n_obs:
        raise InvalidArgumentError(f"K={k} exceeds the number of observations {n_obs}")
    if k < 1:
        raise InvalidArgumentError("K must be >= 1")
    labels = rng.integers(0, k, size=n_obs)
    while True:
        sizes = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(sizes == 0)
        if empty.size == 0:
            return AssignmentState(labels, k)
        # only steal from clusters that can spare a member
        donors = np.flatnonzero(sizes[labels] > 1)
        labels[donors[rng.integers(donors.size)]] = empty[0]


def update_weights(sizes, nu) -> np.ndarray:
    """Mode of the Dirichlet full conditional of the mixture weights."""
    sizes = np.asarray(sizes, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return (sizes + nu - 1.0) / (sizes.sum() + nu.sum() - len(nu))


def build_caches(Yo, labels, k, design, backend=None) -> list:
    return [MomentCache.from_rows(design, Yo[labels == j], backend) for j in range(k)]


def candidate_scores(y, caches, params, base, rule, backend=None) -> np.ndarray:
    """Log-score of placing ``y`` in each cluster, relative to leaving it out.

    ``caches`` must exclude ``y``; ``base[k]`` is the current collapsed
    likelihood of cluster ``k``. Terms of the untouched clusters and all
    parameter priors cancel across candidates.
    """
    return np.array([
        cluster_log_marginal(c, p, rule, extra=y, weight=1.0, backend=backend) - b
        for c, p, b in zip(caches, params, base)
    ])


def _draw(scores, rng) -> int:
    top = np.max(scores)
    if not np.isfinite(top):
        raise NumericalFailureError(f"all candidate scores are -inf: {scores}")
    w = np.exp(scores - top)
    cum = np.cumsum(w)
    j = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(j, len(scores) - 1)


def se_step(Yo, state: AssignmentState, params, caches, rule: NeighborRule, rng,
            backend=None, shuffle: bool = False) -> AssignmentState:
    """One sequential collapsed-Gibbs sweep; mutates ``caches`` in place."""
    k = state.k
    labels = state.labels.copy()
    if k == 1:
        return AssignmentState(labels, k)
    base = [cluster_log_marginal(c, p, rule, backend=backend) for c, p in zip(caches, params)]
    sweep = rng.permutation(len(labels)) if shuffle else range(len(labels))
    for ell in sweep:
        y = Yo[ell]
        old = labels[ell]
        caches[old].remove(y, backend)
        base[old] = cluster_log_marginal(caches[old], params[old], rule, backend=backend)
        scores = candidate_scores(y, caches, params, base, rule, backend)
        new = _draw(scores, rng)
        caches[new].add(y, backend)
        base[new] = base[new] + scores[new]
        labels[ell] = new
    return AssignmentState(labels, k)


def _pack(p: ClusterParams) -> np.ndarray:
    return np.concatenate([[p.mu], np.log(p.theta.as_array())])


def _unpack(x, pi) -> ClusterParams | None:
    if not np.all(np.isfinite(x)) or np.any(np.abs(x[1:]) > _LOG_THETA_BOUND):
        return None
    return ClusterParams(float(x[0]), ThetaParams.from_array(np.exp(x[1:])), pi)


def cluster_objective(cache, params, prior, rule, m=None, backend=None) -> float:
    """Collapsed log likelihood plus parameter log prior for one cluster."""
    return cluster_log_marginal(cache, params, rule, m=m, backend=backend) + log_prior(params, prior)


def _optimize_cluster(cache, prev: ClusterParams, prior, rule, config, backend):
    m_frozen = rule.m(prev.theta.theta3)
    # weight term is constant in (mu, theta); evaluate with pi = 1
    def negobj(x):
        p = _unpack(x, 1.0)
        if p is None:
            return math.inf
        v = cluster_objective(cache, p, prior, rule, m=m_frozen, backend=backend)
        return -v if math.isfinite(v) else math.inf

    x0 = _pack(prev)
    mean_sq = np.mean(cache.Syy) / cache.N
    mean = np.mean(cache.Sy) / cache.N
    sd = math.sqrt(max(mean_sq - mean * mean, 1e-12))
    steps = np.array([0.25 * sd, 0.5, 0.5, 0.5])
    simplex = np.vstack([x0, x0 + np.diag(steps)])
    res = minimize(negobj, x0, method="Nelder-Mead",
                   options={"maxfev": config.nm_max_evals, "xatol": config.nm_tol,
                            "fatol": config.nm_tol, "initial_simplex": simplex})
    cand = _unpack(res.x, 1.0)
    ok = cand is not None and np.isfinite(res.fun)
    if ok:
        old_val = cluster_objective(cache, ClusterParams(prev.mu, prev.theta, 1.0), prior, rule, backend=backend)
        new_val = cluster_objective(cache, cand, prior, rule, backend=backend)
        if new_val >= old_val:
            return cand, True, res.nfev
    return prev, False, res.nfev


def m_step(Yo, state: AssignmentState, params_prev, caches, prior: PriorConfig,
           rule: NeighborRule, config: FitConfig, backend=None):
    """MAP update of every non-empty cluster, then the modal weight update.

    Returns ``(params, diagnostics)``; a cluster whose candidate does not
    improve its objective keeps its previous values and is flagged.
    """
    prior = prior.with_k(state.k)
    sizes = state.cluster_sizes
    pis = update_weights(sizes, prior.nu)
    out, diag = [], {"rejected": [], "nfev": []}
    for j, (cache, prev) in enumerate(zip(caches, params_prev)):
        if sizes[j] == 0:
            out.append(ClusterParams(prev.mu, prev.theta, float(pis[j])))
            diag["nfev"].append(0)
            continue
        new, accepted, nfev = _optimize_cluster(cache, prev, prior, rule, config, backend)
        if not accepted:
            diag["rejected"].append(j)
        diag["nfev"].append(int(nfev))
        out.append(ClusterParams(new.mu, new.theta, float(pis[j])))
    return out, diag


def _validate(Y, coords, config):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise InvalidArgumentError(f"data must be a 2-D matrix, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise InvalidArgumentError("data contain non-finite values")
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[0] != Y.shape[1]:
        raise InvalidArgumentError(
            f"{Y.shape[1]} spots in the data but {coords.shape[0] if coords.ndim else 0} coordinates")
    if config.k > Y.shape[0]:
        raise InvalidArgumentError(f"K={config.k} exceeds the number of observations {Y.shape[0]}")
    return Y, coords


def _initial_params(Yo, state, prior) -> list:
    pis = update_weights(state.cluster_sizes, prior.nu)
    out = []
    for j in range(state.k):
        rows = Yo[state.labels == j]
        out.append(ClusterParams(float(rows.mean()), ThetaParams(1.0, 1.0, 1.0), float(pis[j])))
    return out


def run_chain(Yo, design, config: FitConfig, seed: int, init_labels=None) -> dict:
    """Run a single SEM chain and return its trace and arg-max iterate."""
    rng = np.random.default_rng(seed)
    prior = config.prior.with_k(config.k)
    rule = config.rule
    backend = config.backend
    if init_labels is None:
        state = initialize(Yo.shape[0], config.k, rng)
    else:
        state = AssignmentState(np.asarray(init_labels, dtype=np.int64).copy(), config.k)
    caches = build_caches(Yo, state.labels, config.k, design, backend)
    params = _initial_params(Yo, state, prior)
    params, _ = m_step(Yo, state, params, caches, prior, rule, config, backend)
    lp_prev = log_posterior(caches, params, prior, rule, backend)

    trace, rejected = [], 0
    best = (-math.inf, None, None, -1)
    stall = 0
    for it in range(config.max_iters):
        state = se_step(Yo, state, params, caches, rule, rng, backend, config.shuffle)
        # refresh the sums so incremental rounding never accumulates across sweeps
        caches = build_caches(Yo, state.labels, config.k, design, backend)
        params, diag = m_step(Yo, state, params, caches, prior, rule, config, backend)
        rejected += len(diag["rejected"])
        lp = log_posterior(caches, params, prior, rule, backend)
        trace.append(lp)
        if lp > best[0] or best[1] is None:
            best = (lp, state.labels.copy(), list(params), it)
        stall = stall + 1 if not (lp - lp_prev >= config.tol) else 0
        lp_prev = lp
        log.debug("seed %d iter %d log-posterior %.6f sizes %s", seed, it, lp, state.cluster_sizes)
        if stall >= config.patience:
            break
    return {"trace": trace, "best_lp": best[0], "labels": best[1], "params": best[2],
            "best_iteration": best[3], "iterations": len(trace), "rejected": rejected}


def _sort_by_size(labels, params, k):
    sizes = np.bincount(labels, minlength=k)
    perm = np.argsort(-sizes, kind="stable")  # perm[new] = old
    relabel = np.empty(k, dtype=np.int64)
    relabel[perm] = np.arange(k)
    return relabel[labels], [params[j] for j in perm]


def fit(Y, coords, config: FitConfig = FitConfig(), init_labels=None, design: SpatialDesign | None = None) -> FitResult:
    """Fit the mixture with ``config.restarts`` independent chains.

    Chain ``r`` is seeded with ``config.seed + r``. ``init_labels`` (used by
    every chain) replaces the random initialization.
    """
    Y, coords = _validate(Y, coords, config)
    if design is None:
        design = SpatialDesign.build(coords, config.m_cap)
    elif design.m_max < min(config.m_cap, design.n - 1):
        raise InvalidArgumentError("design neighbor width is smaller than m_cap")
    Yo = np.ascontiguousarray(Y[:, design.order])
    seeds = [config.seed + r for r in range(config.restarts)]
    if config.threads > 1 and config.restarts > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            chains = list(pool.map(lambda s: run_chain(Yo, design, config, s, init_labels), seeds))
    else:
        chains = [run_chain(Yo, design, config, s, init_labels) for s in seeds]

    best_r = max(range(len(chains)), key=lambda r: (chains[r]["best_lp"], -r))
    ch = chains[best_r]
    labels, params = _sort_by_size(ch["labels"], ch["params"], config.k)
    return FitResult(
        labels=labels, params=params, log_posterior=ch["best_lp"],
        trace=[c["trace"] for c in chains], iterations_run=[c["iterations"] for c in chains],
        seed=config.seed, config=config, best_restart=best_r, best_iteration=ch["best_iteration"],
        diagnostics={"rejected_m_steps": [c["rejected"] for c in chains]})
