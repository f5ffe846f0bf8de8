"""Reading and writing matrices, coordinates, labels, fit results and scenarios.

Floats are written with 17 significant digits so that save/load round-trips
are exact.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, ParseError
from .hyperprior import ThetaParams
from .marginal_likelihood import ClusterParams, PriorConfig
from .sem import FitConfig, FitResult

FLOAT_FMT = "{:.17g}"


def fmt(x) -> str:
    return FLOAT_FMT.format(float(x))


@dataclass
class ExpressionMatrix:
    values: np.ndarray
    gene_ids: list
    spot_ids: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.gene_ids), len(self.spot_ids)):
            raise InvalidArgumentError(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.gene_ids)} gene ids x {len(self.spot_ids)} spot ids")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("expression matrix contains non-finite values")


def _float(tok, path, line, col):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", path, line, col) from None


def write_matrix_csv(path, values, row_ids, col_ids, corner="gene_id"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([corner, *col_ids])
        for rid, row in zip(row_ids, np.asarray(values)):
            w.writerow([rid, *(fmt(v) for v in row)])


def read_matrix_csv(path):
    """Read a labeled matrix: header ``corner,col ids...``, then ``row id,values...``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", path, 1)
    header = rows[0]
    if len(header) < 2:
        raise ParseError("header needs an id column and at least one data column", path, 1)
    col_ids = header[1:]
    row_ids, data = [], []
    for i, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", path, i, len(row))
        row_ids.append(row[0])
        data.append([_float(t, path, i, j + 2) for j, t in enumerate(row[1:])])
    values = np.array(data, dtype=float).reshape(len(row_ids), len(col_ids))
    return values, row_ids, col_ids


def write_expression_csv(path, expr: ExpressionMatrix):
    write_matrix_csv(path, expr.values, expr.gene_ids, expr.spot_ids)


def read_expression_csv(path) -> ExpressionMatrix:
    values, genes, spots = read_matrix_csv(path)
    return ExpressionMatrix(values, genes, spots)


def read_counts(path, gene_ids_path=None, spot_ids_path=None):
    """Counts as ``(matrix, gene_ids, spot_ids)`` from CSV or MatrixMarket (``.mtx``)."""
    path = Path(path)
    if path.suffix == ".mtx" or path.name.endswith(".mtx.gz"):
        from scipy.io import mmread
        try:
            M = mmread(str(path))
        except (ValueError, OSError) as exc:
            raise ParseError(str(exc), path) from None
        C = np.asarray(M.toarray() if hasattr(M, "toarray") else M, dtype=float)
        genes = read_id_list(gene_ids_path) if gene_ids_path else [f"gene{i}" for i in range(C.shape[0])]
        spots = read_id_list(spot_ids_path) if spot_ids_path else [f"spot{i}" for i in range(C.shape[1])]
        if len(genes) != C.shape[0] or len(spots) != C.shape[1]:
            raise InvalidArgumentError("id lists do not match the MatrixMarket dimensions")
        return C, genes, spots
    return read_matrix_csv(path)


def read_id_list(path) -> list:
    with open(path) as fh:
        return [line.strip() for line in fh if line.strip()]


def write_coords_csv(path, coords, ids=None):
    coords = np.asarray(coords, dtype=float)
    ids = ids if ids is not None else [str(i) for i in range(len(coords))]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y"])
        for i, (x, y) in zip(ids, coords):
            w.writerow([i, fmt(x), fmt(y)])


def read_coords_csv(path):
    """Coordinates from ``id,x,y`` (or ``x,y``); returns ``(coords, ids)``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ParseError("empty file", path, 1)
    header = [h.strip().lower() for h in rows[0]]
    if header[-2:] != ["x", "y"] or len(header) not in (2, 3):
        raise ParseError("header must be 'id,x,y' or 'x,y'", path, 1)
    has_id = len(header) == 3
    ids, xy = [], []
    for i, row in enumerate(rows[1:], 2):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", path, i)
        ids.append(row[0] if has_id else str(i - 2))
        xy.append([_float(row[-2], path, i, len(row) - 1), _float(row[-1], path, i, len(row))])
    coords = np.array(xy, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(coords)):
        raise InvalidArgumentError(f"{path}: non-finite coordinates")
    return coords, ids


def write_labels_csv(path, labels, ids=None):
    labels = np.asarray(labels)
    ids = ids if ids is not None else [str(i) for i in range(labels.size)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label"])
        for i, lab in zip(ids, labels):
            w.writerow([i, int(lab)])


def read_labels_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or [h.strip().lower() for h in rows[0]] != ["id", "label"]:
        raise ParseError("header must be 'id,label'", path, 1)
    out = []
    for i, row in enumerate(rows[1:], 2):
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, found {len(row)}", path, i)
        try:
            out.append(int(row[1]))
        except ValueError:
            raise ParseError(f"not an integer label: {row[1]!r}", path, i, 2) from None
    return np.array(out, dtype=np.int64)


def fit_to_dict(result: FitResult, gene_ids=None) -> dict:
    sizes = result.cluster_sizes
    rule = result.config.rule
    return {
        "labels": [int(v) for v in result.labels],
        "gene_ids": list(gene_ids) if gene_ids is not None else result.gene_ids,
        "clusters": [
            {"mu": p.mu, "theta": list(map(float, p.theta.as_array())), "pi": p.pi,
             "size": int(s), "m": rule.m(p.theta.theta3)}
            for p, s in zip(result.params, sizes)
        ],
        "log_posterior": result.log_posterior,
        "trace": [list(map(float, t)) for t in result.trace],
        "iterations_run": list(result.iterations_run),
        "best_restart": result.best_restart,
        "best_iteration": result.best_iteration,
        "seed": result.seed,
        "config": result.config.to_dict(),
        "diagnostics": result.diagnostics,
    }


def save_fit(path, result: FitResult, gene_ids=None):
    with open(path, "w") as fh:
        json.dump(fit_to_dict(result, gene_ids), fh, indent=1)
        fh.write("\n")


def config_from_dict(d: dict) -> FitConfig:
    d = dict(d)
    pr = d.pop("prior", {}) or {}
    prior = PriorConfig(lam=float(pr.get("lambda", 100.0)), xi=float(pr.get("xi", 4.0)),
                        nu=tuple(float(v) for v in pr.get("nu", (2.0,))))
    known = set(FitConfig.__dataclass_fields__) - {"prior"}
    return FitConfig(prior=prior, **{k: v for k, v in d.items() if k in known})


def load_fit(path) -> FitResult:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from None
    try:
        config = config_from_dict(d["config"])
        params = [ClusterParams(float(c["mu"]), ThetaParams.from_array(c["theta"]), float(c["pi"]))
                  for c in d["clusters"]]
        res = FitResult(
            labels=np.array(d["labels"], dtype=np.int64), params=params,
            log_posterior=float(d["log_posterior"]), trace=d.get("trace", []),
            iterations_run=d.get("iterations_run", []), seed=int(d.get("seed", config.seed)),
            config=config, best_restart=int(d.get("best_restart", 0)),
            best_iteration=int(d.get("best_iteration", 0)), diagnostics=d.get("diagnostics", {}),
            gene_ids=d.get("gene_ids"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed fit result: {exc}", path) from None
    return res


def load_config_file(path) -> dict:
    """Load a JSON or TOML mapping (by file suffix)."""
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            with open(path, "rb") as fh:
                return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ParseError(str(exc), path) from None
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from None
