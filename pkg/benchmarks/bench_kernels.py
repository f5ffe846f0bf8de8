"""Time the compiled and numpy kernel backends on the same workload.

Usage: python benchmarks/bench_kernels.py [--spots 200] [--obs 60] [--m 23] [--repeat 20]

Reports the per-call time of a full cluster likelihood evaluation and of a
single cache update, plus the largest disagreement between the backends.
"""

import argparse
import timeit

import numpy as np

from srgmm import kernels
from srgmm.hyperprior import ThetaParams
from srgmm.marginal_likelihood import ClusterParams, MomentCache, NeighborRule, cluster_log_marginal
from srgmm.spatial_order import SpatialDesign


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spots", type=int, default=200)
    ap.add_argument("--obs", type=int, default=60)
    ap.add_argument("--m", type=int, default=23)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    design = SpatialDesign.build(rng.uniform(0, 10, (args.spots, 2)), m_max=args.m)
    rows = rng.normal(0, 1.4, (args.obs, args.spots))
    params = ClusterParams(0.05, ThetaParams(2.0, 1.0, 0.3), 0.5)
    rule = NeighborRule(m_cap=args.m)
    y = rng.normal(size=args.spots)

    print(f"n={args.spots} spots, N={args.obs} members, m={args.m}; backends: {kernels.available_backends()}")
    results = {}
    for name in kernels.available_backends():
        cache = MomentCache.from_rows(design, rows, name)
        value = cluster_log_marginal(cache, params, rule, m=args.m, backend=name)
        t_eval = min(timeit.repeat(lambda: cluster_log_marginal(cache, params, rule, m=args.m, backend=name),
                                   number=args.repeat, repeat=3)) / args.repeat
        t_upd = min(timeit.repeat(lambda: (cache.add(y, name), cache.remove(y, name)),
                                  number=args.repeat, repeat=3)) / (2 * args.repeat)
        results[name] = (value, t_eval, t_upd)
        print(f"{name:>9}: likelihood {t_eval * 1e3:8.3f} ms/call   cache update {t_upd * 1e6:8.1f} us/call")
    if len(results) == 2:
        (vc, ec, uc), (vp, ep, up) = results["compiled"], results["python"]
        print(f"speedup: likelihood x{ep / ec:.1f}, update x{up / uc:.1f}; "
              f"|difference| = {abs(vc - vp):.2e} (relative {abs(vc - vp) / abs(vp):.1e})")


if __name__ == "__main__":
    main()
