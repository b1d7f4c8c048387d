"""Prior correlation matrices for the linear-model coefficients and eta sampling."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import norm

from .factors import FactorKind, FactorSpec, ModelSpec

DEFAULT_DECAY = 1.0 / 3.0
MAX_FULL_BASIS = 2**20


def zeta_from_decay(r: float) -> float:
    if not 0.0 < r <= 1.0:
        raise ValueError(f"decay rate r must be in (0, 1], got {r}")
    return (1.0 - r) / (1.0 + r)


def _factor_block(kind: FactorKind, zeta: float) -> np.ndarray:
    """F^-1 Psi F^-T for one factor, scaled so the intercept entry is 1."""
    if kind is FactorKind.TWO_LEVEL:
        psi = np.array([[1.0, zeta], [zeta, 1.0]])
    elif kind is FactorKind.CATEGORICAL:
        psi = np.full((3, 3), zeta)
        np.fill_diagonal(psi, 1.0)
    else:
        z4 = zeta**4
        psi = np.array([[1.0, zeta, z4], [zeta, 1.0, zeta], [z4, zeta, 1.0]])
    finv = np.linalg.inv(kind.coding)
    block = finv @ psi @ finv.T
    return block / block[0, 0]


def correlation_matrix(model: ModelSpec, r: float = DEFAULT_DECAY) -> np.ndarray:
    """Prior correlation R of the model coefficients under effect-hierarchy decay ``r``.

    The full-basis matrix is a Kronecker product of per-factor blocks, so the
    entry for a pair of effects is the product of the block entries picked by
    their multi-indices; only the model's rows and columns are formed.
    """
    zeta = zeta_from_decay(r)
    blocks = [_factor_block(f.kind, zeta) for f in model.factors]
    idx = np.array([e.index for e in model.effects], dtype=int).reshape(model.q, -1)
    R = np.ones((model.q, model.q))
    for j, block in enumerate(blocks):
        R *= block[np.ix_(idx[:, j], idx[:, j])]
    return R


def full_correlation_matrix(factors: Sequence[FactorSpec], r: float = DEFAULT_DECAY) -> np.ndarray:
    """Full tensor-basis R (first factor fastest), built by explicit Kronecker products."""
    zeta = zeta_from_decay(r)
    size = int(np.prod([len(f.levels) for f in factors]))
    if size > MAX_FULL_BASIS:
        raise ValueError(f"full basis of dimension {size} exceeds {MAX_FULL_BASIS}")
    R = np.ones((1, 1))
    for f in factors:
        R = np.kron(_factor_block(f.kind, zeta), R)
    return R


def full_basis_order(factors: Sequence[FactorSpec]) -> list[tuple[int, ...]]:
    """Multi-indices of the full basis in the row order of :func:`full_correlation_matrix`."""
    grids = [range(len(f.levels)) for f in reversed(factors)]
    return [tuple(reversed(c)) for c in itertools.product(*grids)]


@dataclass(frozen=True)
class EtaBox:
    """Independent uniform prior on a box."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("lower and upper bounds differ in length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("eta box bounds must be finite")
        bad = np.flatnonzero(lo > hi)
        if bad.size:
            raise ValueError(f"lower bound exceeds upper bound in coordinate(s) {bad.tolist()}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.lower + u * (self.upper - self.lower)


@dataclass(frozen=True)
class EtaNormal:
    """eta ~ N(mean, variance * diag(corr_diag)); the non-conjugate normal option."""

    variance: float
    corr_diag: np.ndarray
    mean: np.ndarray | None = None

    def __post_init__(self):
        d = np.asarray(self.corr_diag, dtype=float).ravel()
        if self.variance <= 0 or np.any(d <= 0):
            raise ValueError("normal eta prior needs positive variance and correlation diagonal")
        object.__setattr__(self, "corr_diag", d)
        mean = np.zeros_like(d) if self.mean is None else np.asarray(self.mean, dtype=float).ravel()
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self) -> int:
        return self.corr_diag.size

    @property
    def center(self) -> np.ndarray:
        return self.mean

    @property
    def precision_ratio(self) -> float:
        """Ridge weight on R0^-1 in the binary-response information."""
        return 1.0 / self.variance

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        u = np.clip(u, 1e-12, 1 - 1e-12)
        return self.mean + norm.ppf(u) * np.sqrt(self.variance * self.corr_diag)


def _random_lhs(rng: np.random.Generator, B: int, d: int) -> np.ndarray:
    strata = np.argsort(rng.random((B, d)), axis=0)
    return (strata + rng.random((B, d))) / B


def _phi(dist_sq: np.ndarray, p: int) -> float:
    iu = np.triu_indices(dist_sq.shape[0], 1)
    return float(np.sum(dist_sq[iu] ** (-p / 2.0)))


def maximin_lhs(
    B: int,
    d: int,
    rng: np.random.Generator,
    restarts: int = 20,
    sweeps: int = 30,
    p: int = 15,
) -> np.ndarray:
    """Latin hypercube on [0, 1]^d with locally maximized minimum pairwise distance.

    Each restart draws a random LHS and improves it by swapping a coordinate of
    a critical (closest-pair) row with another row, accepting swaps that lower
    the Morris-Mitchell phi_p criterion. Best minimum distance over restarts wins.
    """
    if B == 1:
        return _random_lhs(rng, 1, d)
    best, best_min = None, -np.inf
    for _ in range(restarts):
        X = _random_lhs(rng, B, d)
        D = cdist(X, X, "sqeuclidean")
        np.fill_diagonal(D, np.inf)
        inv = D ** (-p / 2.0)
        for _ in range(sweeps * B):
            i, _j = np.unravel_index(np.argmin(D), D.shape)
            l = int(rng.integers(B - 1))
            l += l >= i
            k = int(rng.integers(d))
            Y_i, Y_l = X[i].copy(), X[l].copy()
            Y_i[k], Y_l[k] = X[l, k], X[i, k]
            di = np.sum((X - Y_i) ** 2, axis=1)
            dl = np.sum((X - Y_l) ** 2, axis=1)
            di[i], di[l] = np.inf, np.sum((Y_i - Y_l) ** 2)
            dl[l], dl[i] = np.inf, di[l]
            old = inv[i].sum() + inv[l].sum() - inv[i, l]
            new_i = di ** (-p / 2.0)
            new_l = dl ** (-p / 2.0)
            new = new_i.sum() + new_l.sum() - new_i[l]
            if new < old:
                X[i], X[l] = Y_i, Y_l
                D[i], D[:, i] = di, di
                D[l], D[:, l] = dl, dl
                inv[i], inv[:, i] = new_i, new_i
                inv[l], inv[:, l] = new_l, new_l
        mind = float(D.min())
        if mind > best_min:
            best, best_min = X.copy(), mind
    return best


def sample_eta(
    prior: EtaBox | EtaNormal,
    B: int,
    strategy: str = "maximin-lhs",
    seed=None,
    restarts: int = 20,
) -> np.ndarray:
    """Draw ``B`` eta vectors (rows) from the prior; deterministic given ``seed``."""
    if B < 1:
        raise ValueError("B must be at least 1")
    rng = np.random.default_rng(seed)
    if strategy in ("iid", "iid-uniform"):
        u = rng.random((B, prior.dim))
    elif strategy in ("maximin-lhs", "lhs"):
        u = maximin_lhs(B, prior.dim, rng, restarts=restarts if strategy == "maximin-lhs" else 1,
                        sweeps=30 if strategy == "maximin-lhs" else 0)
    else:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    return prior.from_unit(u)
