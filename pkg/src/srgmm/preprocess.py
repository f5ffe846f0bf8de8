"""Binomial deviance residuals for count matrices (genes x spots)."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import xlogy

from .errors import InvalidArgumentError


def _check_counts(counts) -> np.ndarray:
    C = np.asarray(counts, dtype=float)
    if C.ndim != 2:
        raise InvalidArgumentError("counts must be a genes x spots matrix")
    if np.any(~np.isfinite(C)) or np.any(C < 0) or np.any(C != np.round(C)):
        raise InvalidArgumentError("counts must be non-negative integers")
    if np.any(C.sum(axis=0) <= 0):
        raise InvalidArgumentError("every spot needs a positive total count")
    return C


def deviance_residuals(counts) -> np.ndarray:
    """Signed square-root binomial deviance contributions under a constant-rate fit."""
    C = _check_counts(counts)
    totals = C.sum(axis=0)
    gene_tot = C.sum(axis=1)
    if np.any(gene_tot == 0):
        warnings.warn(f"{int(np.sum(gene_tot == 0))} gene(s) with zero total count; residuals set to 0",
                      RuntimeWarning, stacklevel=2)
    pi = gene_tot / totals.sum()
    fitted = totals[None, :] * pi[:, None]
    rest = totals[None, :] - C
    fitted_rest = totals[None, :] * (1.0 - pi[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = xlogy(C, np.where(C > 0, C / fitted, 1.0))
        t2 = xlogy(rest, np.where(rest > 0, rest / fitted_rest, 1.0))
    dev = np.maximum(2.0 * (t1 + t2), 0.0)
    r = np.sign(C - fitted) * np.sqrt(dev)
    r[gene_tot == 0] = 0.0
    return r


def binomial_deviance(counts) -> np.ndarray:
    """Total binomial deviance per gene (sum of squared residuals)."""
    return np.sum(deviance_residuals(counts) ** 2, axis=1)


def select_top_deviance(counts, top_n: int, gene_ids=None):
    """Keep the ``top_n`` genes of largest deviance; ties go to the smaller gene id.

    Returns ``(counts_subset, kept_gene_ids, kept_row_indices)``.
    """
    C = _check_counts(counts)
    n_genes = C.shape[0]
    if not 1 <= top_n <= n_genes:
        raise InvalidArgumentError(f"top_n must lie in [1, {n_genes}], got {top_n}")
    if gene_ids is None:
        gene_ids = [str(i) for i in range(n_genes)]
    gene_ids = list(gene_ids)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        dev = binomial_deviance(C)
    ranked = sorted(range(n_genes), key=lambda i: (-dev[i], gene_ids[i]))[:top_n]
    ranked = np.array(ranked, dtype=np.int64)
    return np.asarray(counts)[ranked], [gene_ids[i] for i in ranked], ranked
