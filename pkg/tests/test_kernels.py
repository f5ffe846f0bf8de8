import os
import subprocess
import sys

import numpy as np
import pytest

from srgmm import kernels
from srgmm.hyperprior import ThetaParams
from srgmm.marginal_likelihood import ClusterParams, MomentCache, NeighborRule, cluster_log_marginal, spot_stats
from srgmm.spatial_order import SpatialDesign

needs_compiled = pytest.mark.skipif("compiled" not in kernels.available_backends(),
                                    reason="compiled extension not built")


def _cache(rng, n=40, n_obs=9, width=12, backend=None):
    design = SpatialDesign.build(rng.uniform(0, 6, (n, 2)), m_max=width)
    return MomentCache.from_rows(design, rng.normal(0.5, 1.5, (n_obs, n)), backend), design


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_backend_matches_spot_sum(backend, rng):
    cache, _ = _cache(rng, backend=backend)
    th = ThetaParams(1.3, 0.7, 0.4)
    params = ClusterParams(0.2, th, 1.0)
    for m in (1, 5, 12):
        ref = sum(spot_stats(cache, p, 0.2, th, m).log_term for p in range(cache.design.n))
        got = cluster_log_marginal(cache, params, m=m, backend=backend)
        assert got == pytest.approx(ref, rel=1e-11)


@needs_compiled
def test_compiled_equals_python(rng):
    cache_c, design = _cache(rng, backend="compiled")
    cache_p = MomentCache(design)
    rows = rng.normal(0.5, 1.5, (9, design.n))
    cache_c = MomentCache.from_rows(design, rows, "compiled")
    cache_p = MomentCache.from_rows(design, rows, "python")
    for name in ("Sy", "Syy", "Sx", "Sxy", "Sxx"):
        np.testing.assert_allclose(getattr(cache_c, name), getattr(cache_p, name), rtol=1e-14, atol=1e-12)
    y = rng.normal(size=design.n)
    for theta in [(1, 1, 1), (0.2, 3, 0.05), (8, 0.3, 2.5)]:
        params = ClusterParams(-0.3, ThetaParams(*theta), 0.7)
        for extra, w in [(None, 0.0), (y, 1.0), (rows[2], -1.0)]:
            a = cluster_log_marginal(cache_c, params, NeighborRule(), extra=extra, weight=w, backend="compiled")
            b = cluster_log_marginal(cache_p, params, NeighborRule(), extra=extra, weight=w, backend="python")
            assert a == pytest.approx(b, rel=1e-11)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_var_forces_python():
    env = dict(os.environ, SRGMM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import srgmm.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
