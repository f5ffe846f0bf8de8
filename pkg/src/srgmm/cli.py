"""Command-line entry point: ``srgmm <command> [options]``.

Exit status is 0 on success, 2 for invalid input (bad arguments, malformed
or inconsistent files, resource caps) and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import io as sio
from .errors import InvalidArgumentError, NumericalFailureError, ResourceError, SRGMMError

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("srgmm")


def _global_parent() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand from overwriting a value given before the verb
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default 1)")
    p.add_argument("--verbose", "-v", action="count", default=argparse.SUPPRESS,
                   help="more logging; repeat for debug output")
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _global_parent()
    parser = argparse.ArgumentParser(prog="srgmm", parents=[parent],
                                     description="Spatially referenced Gaussian mixture clustering.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[parent], help="draw a synthetic two-kernel dataset")
    p.add_argument("--scenario", required=True, help="scenario file (JSON or TOML)")
    p.add_argument("--out-prefix", required=True,
                   help="prefix for <prefix>Y.csv, <prefix>coords.csv and <prefix>labels.csv")

    p = sub.add_parser("residuals", parents=[parent], help="binomial deviance residuals of a count matrix")
    p.add_argument("--counts", required=True, help="counts as CSV (gene_id,spots...) or MatrixMarket .mtx")
    p.add_argument("--gene-ids", help="gene id list for .mtx input")
    p.add_argument("--spot-ids", help="spot id list for .mtx input")
    p.add_argument("--top-n", type=int, help="keep the genes with the largest deviance")
    p.add_argument("--out", required=True, help="output expression CSV")

    p = sub.add_parser("fit", parents=[parent], help="cluster the rows of an expression matrix")
    p.add_argument("--expr", required=True, help="expression CSV (gene_id,spot ids...)")
    p.add_argument("--coords", required=True, help="coordinates CSV (id,x,y)")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--lambda", dest="lam", type=float, default=100.0, help="prior variance of mu")
    p.add_argument("--xi", type=float, default=4.0, help="log-scale prior variance of theta")
    p.add_argument("--nu", type=float, nargs="+", default=[2.0], help="Dirichlet concentration(s)")
    p.add_argument("--m-threshold", type=float, default=1e-3)
    p.add_argument("--m-cap", type=int, default=50)
    p.add_argument("--shuffle", action="store_true", help="random sweep order in each SE step")
    p.add_argument("--out", required=True, help="output fit JSON")

    p = sub.add_parser("summarize", parents=[parent], help="per-spot median absolute correlation maps")
    p.add_argument("--fit", required=True)
    p.add_argument("--expr", required=True)
    p.add_argument("--coords", required=True)
    p.add_argument("--variance", choices=("mode", "mean"), default="mode")
    p.add_argument("--out", default="rho.csv")

    p = sub.add_parser("evaluate", parents=[parent], help="Rand index of a fit against true labels")
    p.add_argument("--truth", required=True, help="labels CSV (id,label)")
    p.add_argument("--pred", required=True, help="fit JSON or labels CSV")

    p = sub.add_parser("enrich", parents=[parent], help="gene-set over-representation per cluster")
    p.add_argument("--fit", required=True)
    p.add_argument("--genes", help="gene ids, one per line, in expression row order "
                                    "(defaults to the ids stored in the fit)")
    p.add_argument("--gmt", required=True)
    p.add_argument("--out", help="output CSV (default: stdout)")

    p = sub.add_parser("bench", parents=[parent], help="run a simulation grid and tabulate Rand indices")
    p.add_argument("--preset", default="baseline",
                   help="baseline, variance, scale, nugget, or a JSON/TOML preset file")
    p.add_argument("--out", required=True)
    p.add_argument("--n-spots", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--sizes", help="semicolon-separated size pairs, e.g. '60,60;90,30'")
    p.add_argument("--values", type=float, nargs="+", help="override the varied parameter's values")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=200)
    return parser


def _positive(name, value):
    if value is not None and value < 1:
        raise InvalidArgumentError(f"--{name} must be >= 1")


def cmd_simulate(args):
    from .synthetic import ScenarioSpec, simulate_dataset

    d = sio.load_config_file(args.scenario)
    if "seed" in getattr(args, "_explicit", ()):
        d = {**d, "seed": args.seed}
    spec = ScenarioSpec.from_dict(d)
    Y, labels, coords = simulate_dataset(spec)
    spots = [f"s{i}" for i in range(coords.shape[0])]
    obs = [f"g{i}" for i in range(Y.shape[0])]
    sio.write_matrix_csv(f"{args.out_prefix}Y.csv", Y, obs, spots)
    sio.write_coords_csv(f"{args.out_prefix}coords.csv", coords, spots)
    sio.write_labels_csv(f"{args.out_prefix}labels.csv", labels, obs)
    log.info("wrote %d x %d matrix with prefix %s", *Y.shape, args.out_prefix)


def cmd_residuals(args):
    from .preprocess import deviance_residuals, select_top_deviance

    C, genes, spots = sio.read_counts(args.counts, args.gene_ids, args.spot_ids)
    if args.top_n is not None:
        C, genes, _ = select_top_deviance(C, args.top_n, genes)
    R = deviance_residuals(C)
    sio.write_expression_csv(args.out, sio.ExpressionMatrix(R, genes, spots))


def _load_data(expr_path, coords_path):
    expr = sio.read_expression_csv(expr_path)
    coords, ids = sio.read_coords_csv(coords_path)
    if coords.shape[0] != len(expr.spot_ids):
        raise InvalidArgumentError(
            f"{len(expr.spot_ids)} spots in {expr_path} but {coords.shape[0]} rows in {coords_path}")
    return expr, coords, ids


def cmd_fit(args):
    from .marginal_likelihood import PriorConfig
    from .sem import FitConfig, fit

    expr, coords, _ = _load_data(args.expr, args.coords)
    config = FitConfig(
        k=args.k, restarts=args.restarts, max_iters=args.max_iter, tol=args.tol, patience=args.patience,
        seed=args.seed, prior=PriorConfig(lam=args.lam, xi=args.xi, nu=tuple(args.nu)),
        m_threshold=args.m_threshold, m_cap=args.m_cap, shuffle=args.shuffle, threads=args.threads)
    result = fit(expr.values, coords, config)
    sio.save_fit(args.out, result, gene_ids=expr.gene_ids)
    log.info("log posterior %.6f, cluster sizes %s", result.log_posterior, result.cluster_sizes.tolist())


def cmd_summarize(args):
    from .posterior import correlation_maps

    res = sio.load_fit(args.fit)
    expr, coords, ids = _load_data(args.expr, args.coords)
    if len(res.labels) != expr.values.shape[0]:
        raise InvalidArgumentError(f"fit has {len(res.labels)} labels but the matrix has "
                                   f"{expr.values.shape[0]} rows")
    rho = correlation_maps(expr.values, coords, res.labels, res.params, res.config.rule,
                           variance=args.variance)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["spot_id", "x", "y", *(f"rho_cluster_{k}" for k in range(rho.shape[1]))])
        for sid, (x, y), row in zip(expr.spot_ids, coords, rho):
            w.writerow([sid, sio.fmt(x), sio.fmt(y), *(sio.fmt(v) for v in row)])


def cmd_evaluate(args):
    from .synthetic import rand_index

    truth = sio.read_labels_csv(args.truth)
    if str(args.pred).endswith(".csv"):
        pred = sio.read_labels_csv(args.pred)
    else:
        pred = sio.load_fit(args.pred).labels
    if truth.size != pred.size:
        raise InvalidArgumentError(f"{truth.size} true labels but {pred.size} predicted")
    r = rand_index(truth, pred)
    print(f"Rand index: {r:.6f}")
    print(f"rand={r:.17g}")


def cmd_enrich(args):
    from .enrichment import enrich_clusters, read_gmt

    res = sio.load_fit(args.fit)
    genes = sio.read_id_list(args.genes) if args.genes else res.gene_ids
    if genes is None:
        raise InvalidArgumentError("no gene ids: pass --genes or use a fit that stores them")
    if len(genes) != len(res.labels):
        raise InvalidArgumentError(f"{len(genes)} gene ids for {len(res.labels)} fitted rows")
    rows = enrich_clusters(res.labels, genes, read_gmt(args.gmt, genes))
    cols = ["cluster", "signature", "overlap", "cluster_size", "signature_size", "p", "adj_p"]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({**r, "p": sio.fmt(r["p"]), "adj_p": sio.fmt(r["adj_p"])})
    finally:
        if args.out:
            fh.close()


def _parse_sizes(text):
    try:
        return [tuple(int(v) for v in part.split(",")) for part in text.split(";") if part.strip()]
    except ValueError:
        raise InvalidArgumentError(f"cannot parse --sizes {text!r}") from None


def cmd_bench(args):
    from .bench import load_preset, run_bench, write_bench_csv

    _positive("restarts", args.restarts)
    _positive("max-iter", args.max_iter)
    preset = load_preset(args.preset)
    rows = run_bench(preset, seed=args.seed, n_spots=args.n_spots,
                     sizes=_parse_sizes(args.sizes) if args.sizes else None,
                     replicates=args.replicates, values=args.values,
                     fit_overrides={"restarts": args.restarts, "max_iters": args.max_iter},
                     threads=args.threads)
    write_bench_csv(args.out, rows)
    log.info("wrote %d rows to %s", len(rows), args.out)


COMMANDS = {
    "simulate": cmd_simulate, "residuals": cmd_residuals, "fit": cmd_fit, "summarize": cmd_summarize,
    "evaluate": cmd_evaluate, "enrich": cmd_enrich, "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    explicit = {k for k in ("seed", "threads", "verbose") if hasattr(args, k)}
    args._explicit = explicit
    args.seed = getattr(args, "seed", 0)
    args.threads = getattr(args, "threads", 1)
    args.verbose = getattr(args, "verbose", 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        _positive("threads", args.threads)
        COMMANDS[args.command](args)
    except (NumericalFailureError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"srgmm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidArgumentError, ResourceError, SRGMMError, OSError, ValueError) as exc:
        print(f"srgmm: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
