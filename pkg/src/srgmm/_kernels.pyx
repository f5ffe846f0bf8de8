# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the collapsed cluster likelihood and moment caches.

Mirrors ``srgmm._kernels_py`` exactly in contract; see that module for the
reference formulation.
"""

from libc.math cimport exp, expm1, log, lgamma, sqrt, INFINITY, NAN
from libc.stdlib cimport malloc, free

cdef double LOG_2PI = 1.8378770664093453
cdef double ALPHA = 6.0
cdef double BETA_FACTOR = 5.0
cdef double JITTER = 1e-10


cdef int _chol(double* a, int m) noexcept nogil:
    """In-place lower Cholesky of a row-major m x m block; 0 on success."""
    cdef int i, j, k
    cdef double s, t
    for j in range(m):
        s = a[j * m + j]
        for k in range(j):
            s -= a[j * m + k] * a[j * m + k]
        if not (s > 0.0):
            return 1
        s = sqrt(s)
        a[j * m + j] = s
        for i in range(j + 1, m):
            t = a[i * m + j]
            for k in range(j):
                t -= a[i * m + k] * a[j * m + k]
            a[i * m + j] = t / s
    return 0


cdef double _spot_term(const double[::1] Sy, const double[::1] Syy,
                       const double[:, ::1] Sx, const double[:, ::1] Sxy,
                       const double[:, :, ::1] Sxx,
                       const long[:, ::1] nb, int p, int m, double N, double Ntot,
                       double mu, double t1, double t2, double t3,
                       const double[::1] extra, double w,
                       double* A, double* b, double* A0) noexcept nogil:
    cdef int a, c
    cdef double f, scale, beta, alpha_t, beta_t, syy, quad, logdetA, logdetV
    cdef double xa, yp, tr, z
    cdef double mu2N = N * mu * mu
    f = -expm1(-t2 / sqrt(<double>(p + 1)))
    if not (f > 0.0):
        return NAN
    scale = t1 * f
    beta = BETA_FACTOR * scale

    syy = Syy[p] - 2.0 * mu * Sy[p] + mu2N
    if w != 0.0:
        yp = extra[p] - mu
        syy += w * yp * yp
    for a in range(m):
        b[a] = Sxy[p, a] - mu * Sx[p, a] - mu * Sy[p] + mu2N
        for c in range(a + 1):
            A[a * m + c] = Sxx[p, a, c] - mu * (Sx[p, a] + Sx[p, c]) + mu2N
        A[a * m + a] += scale * exp(t3 * (a + 1))
    if w != 0.0:
        for a in range(m):
            xa = extra[nb[p, a]] - mu
            b[a] += w * xa * yp
            for c in range(a + 1):
                A[a * m + c] += w * xa * (extra[nb[p, c]] - mu)
    for a in range(m):
        for c in range(a):
            A[c * m + a] = A[a * m + c]

    logdetA = 0.0
    if m > 0:
        for a in range(m * m):
            A0[a] = A[a]
        if _chol(A, m) != 0:
            tr = 0.0
            for a in range(m):
                tr += A0[a * m + a]
            for a in range(m * m):
                A[a] = A0[a]
            for a in range(m):
                A[a * m + a] += JITTER * tr / m
            if _chol(A, m) != 0:
                return -INFINITY
        # forward solve L z = b, accumulate z'z
        quad = 0.0
        for a in range(m):
            z = b[a]
            for c in range(a):
                z -= A[a * m + c] * b[c]
            z /= A[a * m + a]
            b[a] = z
            quad += z * z
            logdetA += log(A[a * m + a])
        logdetA *= 2.0
    else:
        quad = 0.0

    beta_t = beta + 0.5 * (syy - quad)
    if not (beta_t > 0.0):
        return -INFINITY
    alpha_t = ALPHA + 0.5 * Ntot
    logdetV = -t3 * 0.5 * m * (m + 1) - m * log(scale)
    return (-0.5 * logdetA - 0.5 * logdetV + ALPHA * log(beta) - alpha_t * log(beta_t)
            + lgamma(alpha_t) - lgamma(ALPHA) - 0.5 * Ntot * LOG_2PI)


def cluster_loglik(const double[::1] Sy, const double[::1] Syy,
                   const double[:, ::1] Sx, const double[:, ::1] Sxy,
                   const double[:, :, ::1] Sxx, double N,
                   const long[:, ::1] nb, const long[::1] counts,
                   double mu, double t1, double t2, double t3, int m,
                   const double[::1] extra, double w):
    """Sum over spots of the collapsed log-likelihood terms (no weight term)."""
    cdef int n = Sy.shape[0]
    cdef int p, mp
    cdef double total = 0.0, term
    cdef double Ntot = N + w
    cdef int width = Sx.shape[1]
    if m > width:
        m = width
    if Ntot == 0.0:
        return 0.0
    cdef double* A = <double*> malloc(sizeof(double) * (m * m + 1))
    cdef double* A0 = <double*> malloc(sizeof(double) * (m * m + 1))
    cdef double* b = <double*> malloc(sizeof(double) * (m + 1))
    if A == NULL or A0 == NULL or b == NULL:
        free(A); free(A0); free(b)
        raise MemoryError()
    try:
        with nogil:
            for p in range(n):
                mp = counts[p]
                if mp > m:
                    mp = m
                term = _spot_term(Sy, Syy, Sx, Sxy, Sxx, nb, p, mp, N, Ntot, mu, t1, t2, t3,
                                  extra, w, A, b, A0)
                if term != term:
                    total = NAN
                    break
                total += term
                if total == -INFINITY:
                    break
    finally:
        free(A); free(A0); free(b)
    if total != total:
        raise ValueError("degenerate prior: range factor is zero")
    return total


def cache_update(double[::1] Sy, double[::1] Syy, double[:, ::1] Sx,
                 double[:, ::1] Sxy, double[:, :, ::1] Sxx,
                 const long[:, ::1] nb, const long[::1] counts,
                 const double[::1] y, double w):
    """Add ``w`` copies of observation ``y`` (ordered positions) to the raw sums."""
    cdef int n = Sy.shape[0]
    cdef int p, a, c, mp
    cdef double yp, xa
    with nogil:
        for p in range(n):
            yp = y[p]
            Sy[p] += w * yp
            Syy[p] += w * yp * yp
            mp = counts[p]
            for a in range(mp):
                xa = y[nb[p, a]]
                Sx[p, a] += w * xa
                Sxy[p, a] += w * xa * yp
                for c in range(a + 1):
                    Sxx[p, a, c] += w * xa * y[nb[p, c]]
                    if c != a:
                        Sxx[p, c, a] = Sxx[p, a, c]
