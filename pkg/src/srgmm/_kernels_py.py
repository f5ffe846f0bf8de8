"""Pure numpy implementation of the hot kernels.

Used when the compiled extension is unavailable or disabled via the
``SRGMM_PURE_PYTHON`` environment variable. Spots are processed as one
batch: every per-spot block is padded to the common width ``m`` with an
identity tail, which leaves the Cholesky factor and the quadratic form of
the real block untouched.
"""

import math

import numpy as np
from scipy.special import gammaln

LOG_2PI = math.log(2.0 * math.pi)
ALPHA = 6.0
BETA_FACTOR = 5.0
JITTER = 1e-10


def _centered(Sy, Syy, Sx, Sxy, Sxx, N, nb, counts, mu, m, extra, w):
    n = Sy.shape[0]
    mu2N = N * mu * mu
    syy = Syy - 2.0 * mu * Sy + mu2N
    sx = Sx[:, :m]
    b = Sxy[:, :m] - mu * sx - (mu * Sy)[:, None] + mu2N
    A = Sxx[:, :m, :m] - mu * (sx[:, :, None] + sx[:, None, :]) + mu2N
    if w != 0.0:
        yt = extra - mu
        xt = np.where(nb[:, :m] >= 0, extra[nb[:, :m]], mu) - mu
        syy = syy + w * yt * yt
        b = b + w * xt * yt[:, None]
        A = A + w * xt[:, :, None] * xt[:, None, :]
    mask = np.arange(m)[None, :] < np.minimum(counts, m)[:, None]
    pair = mask[:, :, None] & mask[:, None, :]
    A = np.where(pair, A, 0.0)
    b = np.where(mask, b, 0.0)
    return syy, b, A, mask


def cluster_loglik(Sy, Syy, Sx, Sxy, Sxx, N, nb, counts, mu, t1, t2, t3, m, extra, w):
    """Sum over spots of the collapsed log-likelihood terms (no weight term)."""
    n = Sy.shape[0]
    m = min(int(m), Sx.shape[1])
    Ntot = N + w
    if Ntot == 0:
        return 0.0
    pos = np.arange(1, n + 1, dtype=float)
    f = -np.expm1(-t2 / np.sqrt(pos))
    if not np.all(f > 0):
        raise ValueError("degenerate prior: range factor is zero")
    scale = t1 * f
    beta = BETA_FACTOR * scale
    mp = np.minimum(counts, m).astype(float)

    syy, b, A, mask = _centered(Sy, Syy, Sx, Sxy, Sxx, N, nb, counts, mu, m, extra, w)
    ranks = np.arange(1, m + 1, dtype=float)
    vinv = scale[:, None] * np.exp(t3 * ranks)[None, :]
    diag = np.where(mask, vinv, 1.0)
    idx = np.arange(m)
    A[:, idx, idx] += diag

    if m > 0:
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            L = _cholesky_with_jitter(A, mp)
            if L is None:
                return -math.inf
        logdetA = 2.0 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
        z = np.linalg.solve(L, b[:, :, None])[:, :, 0]
        quad = np.sum(z * z, axis=1)
    else:
        logdetA = np.zeros(n)
        quad = np.zeros(n)

    beta_t = beta + 0.5 * (syy - quad)
    if not np.all(beta_t > 0):
        return -math.inf
    alpha_t = ALPHA + 0.5 * Ntot
    logdetV = -t3 * 0.5 * mp * (mp + 1) - mp * np.log(scale)
    terms = (-0.5 * logdetA - 0.5 * logdetV + ALPHA * np.log(beta) - alpha_t * np.log(beta_t)
             + gammaln(alpha_t) - gammaln(ALPHA) - 0.5 * Ntot * LOG_2PI)
    return float(np.sum(terms))


def _cholesky_with_jitter(A, mp):
    out = np.empty_like(A)
    m = A.shape[1]
    for p in range(A.shape[0]):
        try:
            out[p] = np.linalg.cholesky(A[p])
        except np.linalg.LinAlgError:
            k = int(mp[p])
            tr = np.trace(A[p, :k, :k])
            B = A[p].copy()
            B[np.arange(k), np.arange(k)] += JITTER * tr / max(k, 1)
            try:
                out[p] = np.linalg.cholesky(B)
            except np.linalg.LinAlgError:
                return None
    return out


def cache_update(Sy, Syy, Sx, Sxy, Sxx, nb, counts, y, w):
    """Add ``w`` copies of observation ``y`` (ordered positions) to the raw sums."""
    Sy += w * y
    Syy += w * y * y
    if Sx.shape[1] == 0:
        return
    x = np.where(nb >= 0, y[nb], 0.0)
    Sx += w * x
    Sxy += w * x * y[:, None]
    Sxx += w * x[:, :, None] * x[:, None, :]
