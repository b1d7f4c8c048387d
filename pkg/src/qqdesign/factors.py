"""Factor coding, model expansion, candidate sets and link weights.

Effects are stored as multi-indices into the full tensor-product basis: one
entry per factor, 0 meaning the factor is absent, 1 the first comparison
(or linear) column, 2 the second comparison (or quadratic) column. The
effect vector f(x) is the product of the per-factor codings, so interactions
come out as elementwise products of their parent main-effect columns.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit, ndtr

PROB_EPS = 1e-12

_S32 = np.sqrt(1.5)
_S12 = np.sqrt(0.5)
_S2 = np.sqrt(2.0)

# rows: levels; columns: intercept, first comparison, second comparison
_CODING_2 = np.array([[1.0, -1.0], [1.0, 1.0]])
_CODING_3 = np.array(
    [
        [1.0, -_S32, _S12],
        [1.0, 0.0, -_S2],
        [1.0, _S32, _S12],
    ]
)


class FactorKind(str, enum.Enum):
    TWO_LEVEL = "two-level"
    CATEGORICAL = "categorical"
    QUANTITATIVE = "quantitative"

    @property
    def levels(self) -> tuple[int, ...]:
        return (-1, 1) if self is FactorKind.TWO_LEVEL else (-1, 0, 1)

    @property
    def coding(self) -> np.ndarray:
        return _CODING_2 if self is FactorKind.TWO_LEVEL else _CODING_3


class Link(str, enum.Enum):
    LOGIT = "logit"
    PROBIT = "probit"


@dataclass(frozen=True)
class FactorSpec:
    name: str
    kind: FactorKind

    def __post_init__(self):
        object.__setattr__(self, "kind", FactorKind(self.kind))

    @property
    def levels(self) -> tuple[int, ...]:
        return self.kind.levels

    def level_index(self, level) -> int:
        try:
            return self.levels.index(int(level))
        except (ValueError, TypeError):
            raise ValueError(
                f"level {level!r} is not valid for {self.kind.value} factor {self.name!r}"
            ) from None

    def column_label(self, col: int) -> str:
        if self.kind is FactorKind.TWO_LEVEL:
            return self.name
        suffix = {FactorKind.CATEGORICAL: ("1", "2"), FactorKind.QUANTITATIVE: ("l", "q")}
        return f"{self.name}.{suffix[self.kind][col - 1]}"


def encode_effect_columns(factor: FactorSpec, level) -> tuple[float, ...]:
    """Coded effect values of one factor at one level (1 value for 2-level, 2 for 3-level)."""
    row = factor.kind.coding[factor.level_index(level)]
    return tuple(float(v) for v in row[1:])


@dataclass(frozen=True)
class Effect:
    """One model column, as a per-factor multi-index into the tensor basis."""

    index: tuple[int, ...]

    def order(self, factors: Sequence[FactorSpec]) -> int:
        """Effect-hierarchy order: a quadratic column counts twice, a comparison once."""
        total = 0
        for f, c in zip(factors, self.index):
            if c == 0:
                continue
            total += 2 if (c == 2 and f.kind is FactorKind.QUANTITATIVE) else 1
        return total

    def label(self, factors: Sequence[FactorSpec]) -> str:
        parts = [f.column_label(c) for f, c in zip(factors, self.index) if c]
        return ":".join(parts) if parts else "(Intercept)"


@dataclass(frozen=True)
class ModelSpec:
    factors: tuple[FactorSpec, ...]
    effects: tuple[Effect, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "effects", tuple(self.effects))
        p = len(self.factors)
        if len(set(self.effects)) != len(self.effects):
            raise ValueError("duplicate effects in model")
        for e in self.effects:
            if len(e.index) != p:
                raise ValueError(f"effect {e.index} does not match {p} factors")
            for f, c in zip(self.factors, e.index):
                if not 0 <= c < len(f.levels):
                    raise ValueError(f"effect {e.index} references column {c} of {f.name!r}")

    @property
    def q(self) -> int:
        return len(self.effects)

    @property
    def labels(self) -> list[str]:
        return [e.label(self.factors) for e in self.effects]

    def effect_index(self, label: str) -> int:
        return self.labels.index(label)

    @classmethod
    def from_labels(cls, factors: Sequence[FactorSpec], labels: Iterable[str]) -> "ModelSpec":
        """Build a model from effect labels such as ``"x1"``, ``"x4.2"``, ``"x1:x5.l"``."""
        factors = tuple(factors)
        lookup = {}
        for j, f in enumerate(factors):
            for c in range(1, len(f.levels)):
                lookup[f.column_label(c)] = (j, c)
        effects = []
        for lab in labels:
            idx = [0] * len(factors)
            if lab not in ("(Intercept)", "1", "intercept"):
                for part in lab.split(":"):
                    if part not in lookup:
                        raise ValueError(f"effect {lab!r} references unknown column {part!r}")
                    j, c = lookup[part]
                    if idx[j]:
                        raise ValueError(f"effect {lab!r} uses factor {factors[j].name!r} twice")
                    idx[j] = c
            effects.append(Effect(tuple(idx)))
        return cls(factors, tuple(effects))


def _kron_key(effect: Effect) -> tuple[int, ...]:
    # first factor varies fastest
    return tuple(reversed(effect.index))


def full_quadratic(factors: Sequence[FactorSpec]) -> ModelSpec:
    """Intercept, main effects, two-factor interactions of main columns, quadratics.

    For a quantitative factor only the linear column enters interactions; both
    comparison columns of a categorical factor do.
    """
    factors = tuple(factors)
    p = len(factors)
    main_cols = [(1, 2) if f.kind is FactorKind.CATEGORICAL else (1,) for f in factors]
    effects = {Effect((0,) * p)}
    for j, f in enumerate(factors):
        for c in range(1, len(f.levels)):
            idx = [0] * p
            idx[j] = c
            effects.add(Effect(tuple(idx)))
    for j, k in itertools.combinations(range(p), 2):
        for cj in main_cols[j]:
            for ck in main_cols[k]:
                idx = [0] * p
                idx[j], idx[k] = cj, ck
                effects.add(Effect(tuple(idx)))
    return ModelSpec(factors, tuple(sorted(effects, key=_kron_key)))


def expand_model(point: Sequence, model: ModelSpec) -> np.ndarray:
    """Effect vector f(x) for one point given as a tuple of level labels."""
    if len(point) != len(model.factors):
        raise ValueError(f"point has {len(point)} levels, model has {len(model.factors)} factors")
    rows = [f.kind.coding[f.level_index(lv)] for f, lv in zip(model.factors, point)]
    out = np.ones(model.q)
    for k, e in enumerate(model.effects):
        for row, c in zip(rows, e.index):
            if c:
                out[k] *= row[c]
    return out


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Discrete candidate points with their expanded model rows.

    ``ids`` records each point's position in the set it was cut from, so a
    filtered set can still report indices of the original full factorial.
    """

    model: ModelSpec
    points: np.ndarray  # (N, p) level labels
    fmatrix: np.ndarray  # (N, q)
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.ids is None:
            object.__setattr__(self, "ids", np.arange(len(self.points)))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def q(self) -> int:
        return self.model.q

    def subset(self, idx) -> "CandidateSet":
        idx = np.asarray(idx, dtype=int)
        return CandidateSet(self.model, self.points[idx], self.fmatrix[idx], self.ids[idx])

    def locate(self, points) -> np.ndarray:
        """Candidate index of each given level-label tuple."""
        table = {tuple(int(v) for v in p): i for i, p in enumerate(self.points)}
        out = []
        for p in points:
            key = tuple(int(v) for v in p)
            if key not in table:
                raise ValueError(f"point {key} is not in the candidate set")
            out.append(table[key])
        return np.asarray(out, dtype=int)

    @classmethod
    def from_points(cls, model: ModelSpec, points) -> "CandidateSet":
        pts = np.asarray(points, dtype=int).reshape(-1, len(model.factors))
        fm = np.array([expand_model(p, model) for p in pts]).reshape(len(pts), model.q)
        return cls(model, pts, fm)


def full_factorial(factors_or_model) -> CandidateSet:
    """All level combinations, first factor varying fastest.

    Accepts a ModelSpec, or a plain factor list (the model is then the
    saturated main-effects-only intercept model).
    """
    if isinstance(factors_or_model, ModelSpec):
        model = factors_or_model
    else:
        factors = tuple(factors_or_model)
        if not factors:
            raise ValueError("need at least one factor")
        p = len(factors)
        eff = [Effect((0,) * p)]
        for j, f in enumerate(factors):
            for c in range(1, len(f.levels)):
                idx = [0] * p
                idx[j] = c
                eff.append(Effect(tuple(idx)))
        model = ModelSpec(factors, tuple(eff))
    grids = [f.levels for f in reversed(model.factors)]
    pts = [tuple(reversed(combo)) for combo in itertools.product(*grids)]
    return CandidateSet.from_points(model, pts)


@dataclass(frozen=True, eq=False)
class Design:
    """Ordered multiset of candidate indices (replicates allowed)."""

    cands: CandidateSet
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.cands)):
            raise ValueError("design index outside the candidate set")
        object.__setattr__(self, "indices", idx)

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def fmatrix(self) -> np.ndarray:
        return self.cands.fmatrix[self.indices]

    @property
    def points(self) -> np.ndarray:
        return self.cands.points[self.indices]

    def counts(self) -> np.ndarray:
        """Replication count of every candidate point."""
        return np.bincount(self.indices, minlength=len(self.cands))

    @property
    def m(self) -> int:
        return int(np.count_nonzero(self.counts()))


def link_prob(fx, eta, link: Link | str = Link.LOGIT) -> np.ndarray | float:
    """pi(x, eta) for one effect vector or a stack of them, clamped to [eps, 1 - eps]."""
    fx = np.asarray(fx, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if fx.shape[-1] != eta.shape[-1]:
        raise ValueError("effect vector and eta have different lengths")
    lin = fx @ eta
    p = expit(lin) if Link(link) is Link.LOGIT else ndtr(lin)
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(p) if np.ndim(p) == 0 else p


def point_weights(fmatrix, eta, link: Link | str = Link.LOGIT):
    """(w0, w1, w2) arrays for every row of ``fmatrix``."""
    fmatrix = np.asarray(fmatrix, dtype=float)
    p = np.atleast_1d(link_prob(fmatrix, eta, link))
    w1 = p
    w2 = 1.0 - p
    if Link(link) is Link.LOGIT:
        w0 = w1 * w2
    else:
        lin = fmatrix @ np.asarray(eta, dtype=float)
        dens = np.exp(-0.5 * lin**2) / np.sqrt(2.0 * np.pi)
        w0 = np.maximum(dens**2 / (w1 * w2), np.finfo(float).tiny)
    return w0, w1, w2


def weight_diagonals(design: Design, eta, link: Link | str = Link.LOGIT):
    """Per-run diagonals of W0, W1, W2 for a design."""
    return point_weights(design.fmatrix, eta, link)
