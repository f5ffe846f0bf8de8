"""Spatially informed normal-inverse-gamma hyperpriors.

A cluster's hyperparameters ``theta = (marginal variance, range, decay)``
are mapped to the per-spot prior of the regression coefficients ``u_i``
and conditional variance ``d_i``::

    V_i[j, j] = exp(-decay * j) / (variance * f(i, range)),  j = 1..m_i
    alpha_i   = 6
    beta_i    = 5 * variance * f(i, range)

with ``f(i, range) = 1 - exp(-range / sqrt(i))`` and ``i`` the 1-based
maximin position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePriorError, InvalidArgumentError

ALPHA = 6.0
BETA_FACTOR = 5.0
DEFAULT_M_THRESHOLD = 1e-3
DEFAULT_M_CAP = 50


@dataclass(frozen=True)
class ThetaParams:
    theta1: float
    theta2: float
    theta3: float

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta3"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be positive and finite, got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3])

    @classmethod
    def from_array(cls, values) -> "ThetaParams":
        a, b, c = (float(v) for v in values)
        return cls(a, b, c)


@dataclass(frozen=True)
class SpotPrior:
    v_diag: np.ndarray
    alpha: float
    beta: float


def range_factor(i: int, theta2: float) -> float:
    """``1 - exp(-theta2 / sqrt(i))`` for a 1-based position ``i``."""
    if i < 1:
        raise InvalidArgumentError(f"position must be >= 1, got {i}")
    if theta2 < 0:
        raise InvalidArgumentError(f"theta2 must be non-negative, got {theta2}")
    return -math.expm1(-theta2 / math.sqrt(i))


def spot_prior(theta: ThetaParams, i: int, m_i: int) -> SpotPrior:
    if not 0 <= m_i <= i - 1:
        raise InvalidArgumentError(f"neighbor count {m_i} outside [0, {i - 1}]")
    f = range_factor(i, theta.theta2)
    if f <= 0.0:
        raise DegeneratePriorError(f"range factor is zero at position {i} (theta2={theta.theta2})")
    scale = theta.theta1 * f
    ranks = np.arange(1, m_i + 1, dtype=float)
    return SpotPrior(v_diag=np.exp(-theta.theta3 * ranks) / scale, alpha=ALPHA, beta=BETA_FACTOR * scale)


def select_neighbor_count(theta3: float, threshold: float = DEFAULT_M_THRESHOLD,
                          m_cap: int = DEFAULT_M_CAP) -> int:
    """Largest rank ``j`` with ``exp(-theta3 * j) >= threshold``, clamped to ``[1, m_cap]``."""
    if not 0.0 < threshold < 1.0:
        raise InvalidArgumentError(f"threshold must lie in (0, 1), got {threshold}")
    if m_cap < 1:
        raise InvalidArgumentError(f"m_cap must be >= 1, got {m_cap}")
    if not theta3 > 0:
        raise InvalidArgumentError(f"theta3 must be positive, got {theta3}")
    limit = math.log(1.0 / threshold) / theta3
    if limit >= m_cap:
        return int(m_cap)
    m = int(math.floor(limit))
    # guard the floor against rounding right at the boundary
    while m + 1 <= m_cap and math.exp(-theta3 * (m + 1)) >= threshold:
        m += 1
    while m >= 1 and math.exp(-theta3 * m) < threshold:
        m -= 1
    return int(min(max(m, 1), m_cap))
