"""Maximin ordering of spatial locations and nearest-predecessor neighbor lists.

Both routines are the naive O(n^2) versions; all ties are broken by the
smallest index so the output is a deterministic function of the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


def _as_coords(coords) -> np.ndarray:
    xy = np.array(coords, dtype=float)
    if xy.ndim != 2 or xy.shape[1] != 2:
        if xy.size == 0:
            raise InvalidArgumentError("coordinates are empty")
        raise InvalidArgumentError(f"coordinates must be an (n, 2) array, got shape {xy.shape}")
    if xy.shape[0] == 0:
        raise InvalidArgumentError("coordinates are empty")
    if not np.all(np.isfinite(xy)):
        raise InvalidArgumentError("coordinates contain non-finite values")
    return xy


def maximin_order(coords) -> np.ndarray:
    """Return the maximin permutation of ``coords``.

    The first point is the one nearest the centroid; each following point
    maximizes its minimum distance to the points already ordered.
    ``order[p]`` is the original index of the point at position ``p``.
    """
    xy = _as_coords(coords)
    n = xy.shape[0]
    centroid = xy.mean(axis=0)
    d0 = np.sum((xy - centroid) ** 2, axis=1)
    first = int(np.argmin(d0))  # argmin returns the first minimum

    order = np.empty(n, dtype=np.int64)
    order[0] = first
    taken = np.zeros(n, dtype=bool)
    taken[first] = True
    mind = np.sum((xy - xy[first]) ** 2, axis=1)
    for p in range(1, n):
        cand = np.where(taken, -np.inf, mind)
        nxt = int(np.argmax(cand))
        order[p] = nxt
        taken[nxt] = True
        np.minimum(mind, np.sum((xy - xy[nxt]) ** 2, axis=1), out=mind)
    return order


def build_neighbor_lists(coords, order, m_max: int) -> list[np.ndarray]:
    """For each maximin position, the ``min(m_max, p)`` nearest earlier positions.

    Lists hold *positions* (not original indices), sorted by increasing
    distance with ties going to the smaller position.
    """
    if int(m_max) != m_max or m_max < 1:
        raise InvalidArgumentError(f"m_max must be a positive integer, got {m_max!r}")
    xy = _as_coords(coords)
    order = np.asarray(order, dtype=np.int64)
    n = xy.shape[0]
    if order.shape != (n,) or not np.array_equal(np.sort(order), np.arange(n)):
        raise InvalidArgumentError("order is not a permutation of the coordinate indices")
    pts = xy[order]
    lists = [np.empty(0, dtype=np.int64)]
    for p in range(1, n):
        d = np.sum((pts[:p] - pts[p]) ** 2, axis=1)
        k = min(int(m_max), p)
        # stable sort keeps smaller positions first on exact ties
        idx = np.argsort(d, kind="stable")[:k]
        lists.append(idx.astype(np.int64))
    return lists


@dataclass(frozen=True)
class SpatialDesign:
    """Coordinates, maximin order and padded neighbor table.

    ``neighbors`` is an (n, width) int array of positions with ``-1``
    padding; ``counts[p] = min(width, p)``.
    """

    coords: np.ndarray
    order: np.ndarray
    neighbors: np.ndarray
    counts: np.ndarray
    m_max: int

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    @property
    def width(self) -> int:
        return int(self.neighbors.shape[1])

    @property
    def neighbor_lists(self) -> list[np.ndarray]:
        return [self.neighbors[p, : self.counts[p]] for p in range(self.n)]

    @property
    def inverse_order(self) -> np.ndarray:
        inv = np.empty_like(self.order)
        inv[self.order] = np.arange(self.n)
        return inv

    @classmethod
    def build(cls, coords, m_max: int = 50, order=None) -> "SpatialDesign":
        """Order ``coords`` (maximin unless ``order`` is given) and tabulate neighbors."""
        xy = _as_coords(coords)
        if order is None:
            order = maximin_order(xy)
        lists = build_neighbor_lists(xy, order, m_max)
        n = xy.shape[0]
        width = min(int(m_max), n - 1)
        table = np.full((n, max(width, 0)), -1, dtype=np.int64)
        counts = np.zeros(n, dtype=np.int64)
        for p, lst in enumerate(lists):
            table[p, : len(lst)] = lst
            counts[p] = len(lst)
        for arr in (xy, table, counts):
            arr.setflags(write=False)
        order = np.asarray(order, dtype=np.int64).copy()
        order.setflags(write=False)
        return cls(coords=xy, order=order, neighbors=table, counts=counts, m_max=int(m_max))
