"""High-probability upper bound on the true calibration error from an observed ECE.

    eps = ECE_Z + (J * sqrt(2) / sqrt(N)) * sqrt(2 ln 2 - ln delta)

holds with probability at least 1 - delta over the draw of the N test examples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import InvalidInputError


def _check(n_bins, delta):
    if int(n_bins) != n_bins or n_bins < 1:
        raise InvalidInputError(f"bin count must be a positive integer, got {n_bins}")
    if not 0.0 < delta <= 1.0:
        raise InvalidInputError(f"delta must lie in (0, 1], got {delta}")


def slack(n_bins: int, n: int, delta: float) -> float:
    """Additive term of the bound; depends only on (J, N, delta)."""
    _check(n_bins, delta)
    if int(n) != n or n < 1:
        raise InvalidInputError(f"N must be a positive integer, got {n}")
    return n_bins * math.sqrt(2.0) / math.sqrt(n) * math.sqrt(2.0 * math.log(2.0) - math.log(delta))


def ce_bound(ece_z: float, n_bins: int, n: int, delta: float) -> float:
    if not 0.0 <= ece_z <= 1.0:
        raise InvalidInputError(f"observed ECE must lie in [0, 1], got {ece_z}")
    return ece_z + slack(n_bins, n, delta)


def n_for_slack(target: float, n_bins: int, delta: float) -> int:
    """Smallest N whose slack term is at most ``target``."""
    _check(n_bins, delta)
    if not target > 0 or math.isinf(target):
        raise InvalidInputError(f"slack must be positive and finite, got {target}")
    k = n_bins * math.sqrt(2.0) * math.sqrt(2.0 * math.log(2.0) - math.log(delta))
    n = max(1, math.ceil((k / target) ** 2))
    # closed-form guess can be off by one either way after rounding
    while slack(n_bins, n, delta) > target:
        n += 1
    while n > 1 and slack(n_bins, n - 1, delta) <= target:
        n -= 1
    return n


@dataclass(frozen=True)
class BoundQuery:
    ece_z: float
    n_bins: int
    n: int
    delta: float

    def __post_init__(self):
        if not 0.0 <= self.ece_z <= 1.0:
            raise InvalidInputError(f"observed ECE must lie in [0, 1], got {self.ece_z}")
        _check(self.n_bins, self.delta)
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInputError(f"N must be a positive integer, got {self.n}")

    def epsilon(self) -> float:
        return ce_bound(self.ece_z, self.n_bins, self.n, self.delta)
