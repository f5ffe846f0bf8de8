"""Simulated two-kernel scenarios and partition scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidArgumentError, NumericalFailureError

FAMILIES = ("exponential", "gaussian")


@dataclass(frozen=True)
class KernelSpec:
    family: str
    sigma2: float
    phi: float
    nugget: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown kernel family {self.family!r}")
        if not (self.sigma2 > 0 and self.phi > 0 and self.nugget >= 0):
            raise InvalidArgumentError("kernel needs sigma2 > 0, phi > 0, nugget >= 0")


@dataclass(frozen=True)
class ScenarioSpec:
    n_spots: int
    cluster_sizes: tuple
    kernels: tuple
    means: tuple | None = None
    bounds: tuple = ((0.0, 10.0), (0.0, 10.0))
    seed: int = 0

    def __post_init__(self):
        if self.n_spots < 1:
            raise InvalidArgumentError("n_spots must be >= 1")
        if not self.cluster_sizes or min(self.cluster_sizes) < 1:
            raise InvalidArgumentError("every cluster needs at least one observation")
        if len(self.kernels) != len(self.cluster_sizes):
            raise InvalidArgumentError("one kernel per cluster is required")
        if self.means is not None and len(self.means) != len(self.cluster_sizes):
            raise InvalidArgumentError("one mean per cluster is required")

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        try:
            kernels = tuple(KernelSpec(**k) for k in d["kernels"])
            return cls(
                n_spots=int(d["n_spots"]),
                cluster_sizes=tuple(int(v) for v in d["cluster_sizes"]),
                kernels=kernels,
                means=tuple(float(v) for v in d["means"]) if d.get("means") is not None else None,
                bounds=tuple(tuple(float(v) for v in b) for b in d.get("bounds", ((0, 10), (0, 10)))),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidArgumentError(f"malformed scenario: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "n_spots": self.n_spots,
            "cluster_sizes": list(self.cluster_sizes),
            "kernels": [vars(k).copy() for k in self.kernels],
            "means": list(self.means) if self.means is not None else None,
            "bounds": [list(b) for b in self.bounds],
            "seed": self.seed,
        }


def kernel_matrix(coords, spec: KernelSpec) -> np.ndarray:
    xy = np.asarray(coords, dtype=float)
    d = cdist(xy, xy)
    if spec.family == "exponential":
        K = spec.sigma2 * np.exp(-d / spec.phi)
    else:
        K = spec.sigma2 * np.exp(-(d / spec.phi) ** 2)
    K[np.diag_indices_from(K)] += spec.nugget
    return K


def sample_spots(n: int, bounds=((0.0, 10.0), (0.0, 10.0)), rng=None) -> np.ndarray:
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    (x0, x1), (y0, y1) = bounds
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgumentError(f"degenerate bounds {bounds}")
    rng = np.random.default_rng(rng)
    return np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])


def _factor(K):
    """Cholesky factor with jitter escalating from 1e-10 to 1e-6 of the mean variance."""
    scale = np.trace(K) / K.shape[0]
    try:
        return np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        pass
    for rel in (1e-10, 1e-9, 1e-8, 1e-7, 1e-6):
        try:
            return np.linalg.cholesky(K + np.eye(K.shape[0]) * rel * scale)
        except np.linalg.LinAlgError:
            continue
    raise NumericalFailureError("kernel matrix not factorizable even with jitter")


def simulate_dataset(spec: ScenarioSpec):
    """Return ``(Y, labels, coords)``; rows are stacked cluster by cluster."""
    rng = np.random.default_rng(spec.seed)
    coords = sample_spots(spec.n_spots, spec.bounds, rng)
    means = spec.means if spec.means is not None else (0.0,) * len(spec.cluster_sizes)
    blocks, labels = [], []
    for k, (size, kern, mean) in enumerate(zip(spec.cluster_sizes, spec.kernels, means)):
        L = _factor(kernel_matrix(coords, kern))
        z = rng.standard_normal((size, spec.n_spots))
        blocks.append(mean + z @ L.T)
        labels.append(np.full(size, k, dtype=np.int64))
    return np.vstack(blocks), np.concatenate(labels), coords


def rand_index(labels_a, labels_b) -> float:
    """Fraction of observation pairs on which two partitions agree."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidArgumentError("partitions must be 1-D and of equal length")
    n = a.size
    if n < 2:
        raise InvalidArgumentError("need at least two observations")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)

    def pairs(x):
        x = np.asarray(x, dtype=np.int64)
        return int(np.sum(x * (x - 1) // 2))

    total = n * (n - 1) // 2
    both = pairs(table)
    same_a = pairs(table.sum(axis=1))
    same_b = pairs(table.sum(axis=0))
    agree = total + 2 * both - same_a - same_b
    return agree / total
