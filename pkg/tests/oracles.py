"""Independent reference computations used by the tests.

Nothing here calls into the package's likelihood code: each oracle works
from the model definition directly (dense covariances, scipy densities,
numerical quadrature, brute-force enumeration).
"""

import itertools
import math

import numpy as np
from scipy import integrate, stats


def prior_terms(theta, i, m):
    """Per-spot prior quantities written out from the model definition."""
    t1, t2, t3 = theta
    f = 1.0 - math.exp(-t2 / math.sqrt(i))
    v = np.array([math.exp(-t3 * j) / (t1 * f) for j in range(1, m + 1)])
    return v, 6.0, 5.0 * t1 * f


def spot_blocks(Yo, neighbors, p, m, mu):
    """Centered responses (N,) and regressors (N, m) for position ``p``."""
    nb = list(neighbors[p][:m])
    y = Yo[:, p] - mu
    X = Yo[:, nb] - mu if nb else np.zeros((Yo.shape[0], 0))
    return y, X


def log_marginal_student(Yo, neighbors, mu, theta, m):
    """Sum over spots of the compound normal-inverse-gamma density (multivariate t)."""
    total = 0.0
    for p in range(Yo.shape[1]):
        k = min(m, len(neighbors[p]))
        v, a, b = prior_terms(theta, p + 1, k)
        y, X = spot_blocks(Yo, neighbors, p, k, mu)
        shape = (b / a) * (np.eye(len(y)) + X @ np.diag(v) @ X.T)
        total += stats.multivariate_t(loc=np.zeros(len(y)), shape=shape, df=2 * a).logpdf(y)
    return float(total)


def _spot_density_quad(y, X, v, a, b):
    """Integrate d out numerically after the Gaussian u integral."""
    C = np.eye(len(y)) + X @ np.diag(v) @ X.T
    sign, logdet = np.linalg.slogdet(C)
    q = float(y @ np.linalg.solve(C, y))
    n = len(y)
    lg = math.lgamma(a)
    # log normalizer at the posterior mode keeps the integrand O(1)
    b_post = b + 0.5 * q
    a_post = a + 0.5 * n
    mode = b_post / (a_post + 1)

    def logf(d):
        return (-0.5 * n * math.log(2 * math.pi * d) - 0.5 * logdet - q / (2 * d)
                + a * math.log(b) - lg - (a + 1) * math.log(d) - b / d)

    ref = logf(mode)
    val, _ = integrate.quad(lambda d: math.exp(logf(d) - ref), 0, np.inf,
                            points=None, epsabs=0, epsrel=1e-11, limit=500)
    return math.log(val) + ref


def log_marginal_quad(Yo, neighbors, mu, theta, m):
    total = 0.0
    for p in range(Yo.shape[1]):
        k = min(m, len(neighbors[p]))
        v, a, b = prior_terms(theta, p + 1, k)
        y, X = spot_blocks(Yo, neighbors, p, k, mu)
        total += _spot_density_quad(y, X, v, a, b)
    return total


def spot_density_dblquad(y, x, v, a, b):
    """Two-dimensional (u, d) quadrature for a single observation and one regressor."""
    log_ig = a * math.log(b) - math.lgamma(a)

    def integrand(u, d):
        r = y - u * x
        return math.exp(-0.5 * math.log(2 * math.pi * d) - r * r / (2 * d)
                        - 0.5 * math.log(2 * math.pi * d * v) - u * u / (2 * d * v)
                        + log_ig - (a + 1) * math.log(d) - b / d)

    # u | d has prior sd sqrt(d v); 12 sd leaves a negligible tail
    half = lambda d: 12.0 * math.sqrt(d * v)
    val, _ = integrate.dblquad(integrand, 1e-9, 80, lambda d: -half(d), half,
                               epsabs=1e-12, epsrel=1e-9)
    return val


def brute_rand(a, b):
    n = len(a)
    agree = 0
    for i, j in itertools.combinations(range(n), 2):
        agree += (a[i] == a[j]) == (b[i] == b[j])
    return agree / (n * (n - 1) // 2)


def brute_fisher(M, K, c, x):
    """Fraction of all size-c subsets of range(M) hitting the first K items at least x times."""
    hits = total = 0
    for draw in itertools.combinations(range(M), c):
        total += 1
        hits += sum(1 for g in draw if g < K) >= x
    return hits / total


def brute_maximin(xy):
    n = len(xy)
    c = xy.mean(axis=0)
    d0 = [float(np.sum((xy[i] - c) ** 2)) for i in range(n)]
    order = [min(range(n), key=lambda i: (d0[i], i))]
    while len(order) < n:
        rest = [i for i in range(n) if i not in order]
        score = {i: min(float(np.sum((xy[i] - xy[j]) ** 2)) for j in order) for i in rest}
        order.append(min(rest, key=lambda i: (-score[i], i)))
    return order


def brute_neighbors(xy, order, m_max):
    pts = xy[order]
    out = []
    for p in range(len(order)):
        d = [(float(np.sum((pts[q] - pts[p]) ** 2)), q) for q in range(p)]
        out.append([q for _, q in sorted(d)[:m_max]])
    return out


def binomial_deviance_direct(C):
    """Per-gene binomial deviance with explicit loops and the 0 log 0 = 0 rule."""
    C = np.asarray(C, dtype=float)
    totals = C.sum(axis=0)
    out = np.zeros(C.shape[0])
    for g in range(C.shape[0]):
        pi = C[g].sum() / totals.sum()
        for i in range(C.shape[1]):
            y, n = C[g, i], totals[i]
            term = 0.0
            if y > 0:
                term += y * math.log(y / (n * pi))
            if n - y > 0:
                term += (n - y) * math.log((n - y) / (n * (1 - pi)))
            out[g] += 2 * term
    return out
