"""Run-size and replication bounds that keep the conditional linear models estimable."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

# guards ceil() against ratios like 2.0000000000000004
_CEIL_SLACK = 1e-9


def _ceil(x: float) -> int:
    return int(math.ceil(x - _CEIL_SLACK))


def _check_probs(pis) -> np.ndarray:
    p = np.atleast_1d(np.asarray(pis, dtype=float))
    if np.any((p <= 0) | (p >= 1)) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    return p


def prop1_bounds(pis, kappa: float) -> tuple[list[int], list[int]]:
    """Per-point replication bounds for Pr(0 < sum Z < n_i) >= kappa on a saturated design.

    Returns (sufficient, necessary) lists of integers.
    """
    if not 0.0 < kappa < 1.0:
        raise ValueError("kappa must lie in (0, 1)")
    p = _check_probs(pis)
    suff = [1 + _ceil(math.log(1 - kappa) / math.log(max(pi, 1 - pi))) for pi in p]
    nec = [
        max(1, _ceil(2 * math.log((1 - kappa) / 2) / (math.log(pi) + math.log(1 - pi))))
        for pi in p
    ]
    return suff, nec


def _prop2_ratio(m: int, q: int, lo: float, hi: float) -> float:
    # max{1, log(1-q/m)/log(1-lo), log(1-q/m)/log(hi)}
    num = math.log(1 - q / m)
    return max(1.0, num / math.log(1 - lo), num / math.log(hi))


def prop2_bounds(m: int, q: int, pi_min: float, pi_max: float) -> tuple[int, int, int, int]:
    """Minimum-replication and run-size bounds for m > q distinct points.

    Returns (n0_sufficient, n_sufficient, n0_necessary, n_necessary).
    """
    if not (isinstance(m, (int, np.integer)) and isinstance(q, (int, np.integer))):
        raise TypeError("m and q must be integers")
    if q < 1 or m <= q:
        raise ValueError(f"need m > q >= 1, got m={m}, q={q}")
    _check_probs([pi_min, pi_max])
    if pi_min > pi_max:
        raise ValueError("pi_min exceeds pi_max")
    suff = _prop2_ratio(m, q, pi_min, pi_max)
    nec = _prop2_ratio(m, q, pi_max, pi_min)
    n0_suff = _ceil(suff)
    return n0_suff, m * n0_suff, _ceil(nec), _ceil(m * nec)


@dataclass
class BoundsReport:
    kappa: float
    per_point_sufficient: list[int]
    per_point_necessary: list[int]
    m: int
    q: int
    pi_min: float
    pi_max: float
    n0_sufficient: int | None = None
    n_sufficient: int | None = None
    n0_necessary: int | None = None
    n_necessary: int | None = None

    @classmethod
    def compute(cls, pis, q: int, kappa: float = 0.5) -> "BoundsReport":
        """Bounds for the distinct points with success probabilities ``pis``.

        The run-size fields stay None when m <= q, where only the per-point
        bounds apply.
        """
        p = _check_probs(pis)
        suff, nec = prop1_bounds(p, kappa)
        rep = cls(kappa, suff, nec, int(p.size), int(q), float(p.min()), float(p.max()))
        if rep.m > q:
            (rep.n0_sufficient, rep.n_sufficient, rep.n0_necessary,
             rep.n_necessary) = prop2_bounds(rep.m, int(q), rep.pi_min, rep.pi_max)
        return rep

    def to_dict(self) -> dict:
        return asdict(self)
