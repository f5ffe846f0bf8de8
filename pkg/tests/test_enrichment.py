import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_fisher
from srgmm.enrichment import bh_adjust, enrich_clusters, fisher_enrichment, read_gmt
from srgmm.errors import InvalidArgumentError, ParseError

U10 = [f"g{i}" for i in range(10)]


def test_fisher_examples():
    sig = U10[:4]
    assert fisher_enrichment(["g0", "g1", "g5"], sig, U10) == pytest.approx(1 / 3, abs=1e-14)
    assert fisher_enrichment(["g6", "g7", "g5"], sig, U10) == pytest.approx(1.0, abs=1e-14)
    assert fisher_enrichment(["g6", "g2"], U10, U10) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(InvalidArgumentError):
        fisher_enrichment(["zz"], sig, U10)


def test_fisher_matches_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(100):
        M = int(rng.integers(1, 13))
        K = int(rng.integers(0, M + 1))
        c = int(rng.integers(0, M + 1))
        universe = [f"g{i}" for i in range(M)]
        cluster = list(rng.choice(universe, size=c, replace=False)) if c else []
        sig = universe[:K]
        x = len(set(cluster) & set(sig))
        assert abs(fisher_enrichment(cluster, sig, universe) - brute_fisher(M, K, c, x)) <= 1e-12


def test_bh_examples():
    np.testing.assert_allclose(bh_adjust([0.01, 0.04, 0.03]), [0.03, 0.04, 0.04])
    np.testing.assert_allclose(bh_adjust([0.2] * 5), [0.2] * 5)
    assert bh_adjust([]).size == 0
    with pytest.raises(InvalidArgumentError):
        bh_adjust([0.5, 1.2])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_bh_properties(p):
    q = bh_adjust(p)
    assert np.all((q >= 0) & (q <= 1))
    assert np.all(q >= np.asarray(p) - 1e-15)
    order = np.argsort(p, kind="stable")
    assert np.all(np.diff(q[order]) >= -1e-15)


def test_read_gmt_and_enrich(tmp_path):
    path = tmp_path / "sets.gmt"
    path.write_text("A\tfirst\tg0\tg1\tg2\tzz\nB\tsecond\tg7\tg8\n\n")
    coll = read_gmt(path, U10)
    assert coll.restricted("A") == {"g0", "g1", "g2"}
    labels = np.array([0, 0, 0, 1, 1, 1, 1, 2, 2, 2])
    rows = enrich_clusters(labels, U10, coll)
    assert len(rows) == 6
    tested = set()
    for k in range(3):
        block = [r for r in rows if r["cluster"] == k]
        np.testing.assert_allclose([r["adj_p"] for r in block], bh_adjust([r["p"] for r in block]))
        tested |= {g for g, l in zip(U10, labels) if l == k}
    assert tested == set(U10)
    a0 = next(r for r in rows if r["cluster"] == 0 and r["signature"] == "A")
    assert a0["overlap"] == 3 and a0["signature_size"] == 3
    assert a0["p"] == pytest.approx(1 / math.comb(10, 3))
    bad = tmp_path / "bad.gmt"
    bad.write_text("onlyname\n")
    with pytest.raises(ParseError) as exc:
        read_gmt(bad, U10)
    assert exc.value.line == 1
