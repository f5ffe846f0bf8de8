"""Over-representation of gene sets among cluster members."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InvalidArgumentError, ParseError


@dataclass(frozen=True)
class GeneSetCollection:
    signatures: dict
    universe: frozenset

    def restricted(self, name: str) -> frozenset:
        return frozenset(self.signatures[name]) & self.universe


def read_gmt(path, universe) -> GeneSetCollection:
    """Parse a tab-separated gene-set file: name, description, members..."""
    sets = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ParseError("expected name<TAB>description<TAB>genes...", path, lineno, 1)
            sets[parts[0]] = frozenset(g for g in parts[2:] if g)
    return GeneSetCollection(sets, frozenset(universe))


def _log_choose(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def fisher_enrichment(cluster_genes, signature_genes, universe) -> float:
    """One-sided hypergeometric upper tail ``P(overlap >= observed)``."""
    universe = set(universe)
    if not universe:
        raise InvalidArgumentError("universe is empty")
    cluster = set(cluster_genes)
    if not cluster <= universe:
        raise InvalidArgumentError("cluster genes must belong to the universe")
    sig = set(signature_genes) & universe
    M, K, c = len(universe), len(sig), len(cluster)
    x = len(cluster & sig)
    hi = min(K, c)
    j = np.arange(x, hi + 1)
    if j.size == 0:
        return 0.0
    logp = _log_choose(K, j) + _log_choose(M - K, c - j) - _log_choose(M, c)
    return float(min(1.0, math.exp(logsumexp(logp))))


def bh_adjust(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise InvalidArgumentError("p-values must be a vector")
    if p.size == 0:
        return p.copy()
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise InvalidArgumentError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    q = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(q, 1.0)
    return out


def enrich_clusters(labels, gene_ids, collection: GeneSetCollection) -> list[dict]:
    """Test every signature against every cluster; adjust within each cluster."""
    labels = np.asarray(labels)
    gene_ids = list(gene_ids)
    if len(gene_ids) != labels.size:
        raise InvalidArgumentError(f"{len(gene_ids)} gene ids for {labels.size} labels")
    universe = collection.universe
    rows = []
    for k in np.unique(labels):
        members = {g for g, lab in zip(gene_ids, labels) if lab == k}
        block = []
        for name in sorted(collection.signatures):
            sig = collection.restricted(name)
            block.append({
                "cluster": int(k), "signature": name, "overlap": len(members & sig),
                "cluster_size": len(members), "signature_size": len(sig),
                "p": fisher_enrichment(members, sig, universe),
            })
        adj = bh_adjust([r["p"] for r in block])
        for r, a in zip(block, adj):
            r["adj_p"] = float(a)
        rows.extend(block)
    return rows
