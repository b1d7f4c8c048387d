"""Bayesian D-optimality criterion and its incremental evaluation engine.

The criterion is a weighted sum of log-determinants of information matrices
``F' W_t F + ridge_t``. The joint criterion has three terms (binary-response
Fisher information with weight 1, and the two conditional linear models with
weight 1/2 each); the classic linear and logistic D-criteria used for the
baseline designs are the one-term special cases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .factors import CandidateSet, Design, Link, ModelSpec, point_weights
from .priors import DEFAULT_DECAY, correlation_matrix

PIVOT_RATIO = 1e-10
# brackets and exchange determinants below this count as singular
SINGULAR_TOL = 1e-10
REFRESH_EVERY = 32

KINDS = ("qq", "glm", "linear")


class SingularDesign(ValueError):
    """An information matrix is singular or not positive definite."""

    def __init__(self, which: str, detail: str = ""):
        self.which = which
        super().__init__(f"singular information matrix {which}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True, eq=False)
class CriterionConfig:
    """Link, ridge weights and prior correlations defining the criterion.

    ``kind`` selects the joint criterion ("qq"), the logistic-only D-criterion
    ("glm", log det F'W0F) or the linear D-criterion ("linear", log det F'F).
    Inverse correlations left as None default to the identity.
    """

    rho: float = 0.0
    R1inv: np.ndarray | None = None
    R2inv: np.ndarray | None = None
    link: Link = Link.LOGIT
    rho0: float = 0.0
    R0inv: np.ndarray | None = None
    kind: str = "qq"

    def __post_init__(self):
        if self.rho < 0 or self.rho0 < 0:
            raise ValueError("ridge weights must be nonnegative")
        if self.kind not in KINDS:
            raise ValueError(f"criterion kind must be one of {KINDS}")
        object.__setattr__(self, "link", Link(self.link))

    @classmethod
    def from_model(
        cls,
        model: ModelSpec,
        rho: float = 0.0,
        r1: float = DEFAULT_DECAY,
        r2: float | None = None,
        link: Link | str = Link.LOGIT,
        rho0: float = 0.0,
        R0inv=None,
    ) -> "CriterionConfig":
        r2 = r1 if r2 is None else r2
        R1inv = np.linalg.inv(correlation_matrix(model, r1))
        R2inv = R1inv if r2 == r1 else np.linalg.inv(correlation_matrix(model, r2))
        return cls(rho=rho, R1inv=R1inv, R2inv=R2inv, link=Link(link), rho0=rho0, R0inv=R0inv)

    def with_kind(self, kind: str) -> "CriterionConfig":
        return CriterionConfig(self.rho, self.R1inv, self.R2inv, self.link, self.rho0, self.R0inv, kind)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([1.0, 0.5, 0.5]) if self.kind == "qq" else np.array([1.0])

    @property
    def names(self) -> tuple[str, ...]:
        return ("M0", "M1", "M2") if self.kind == "qq" else ("M0",)

    def ridges(self, q: int) -> np.ndarray:
        eye = np.eye(q)
        if self.kind == "linear":
            return np.zeros((1, q, q))
        r0 = self.rho0 * (eye if self.R0inv is None else np.asarray(self.R0inv))
        if self.kind == "glm":
            return r0[None]
        r1 = self.rho * (eye if self.R1inv is None else np.asarray(self.R1inv))
        r2 = self.rho * (eye if self.R2inv is None else np.asarray(self.R2inv))
        return np.stack([r0, r1, r2])

    def term_weights(self, fmatrix: np.ndarray, eta) -> np.ndarray:
        """(T, N) weight of every row of ``fmatrix`` in every criterion term."""
        if self.kind == "linear":
            return np.ones((1, len(fmatrix)))
        w0, w1, w2 = point_weights(fmatrix, eta, self.link)
        if self.kind == "glm":
            return w0[None]
        return np.stack([w0, w1, w2])


def spd_logdet(A: np.ndarray, which: str = "") -> float:
    """log det of a symmetric positive-definite matrix via Cholesky, with a pivot-ratio test."""
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise SingularDesign(which, "not positive definite") from None
    piv = np.diag(L) ** 2
    if piv.min() <= PIVOT_RATIO * piv.max():
        raise SingularDesign(which, f"pivot ratio {piv.min() / piv.max():.3g}")
    return float(2.0 * np.sum(np.log(np.diag(L))))


def _information(fmatrix, weights, ridges):
    return np.einsum("tn,ni,nj->tij", weights, fmatrix, fmatrix) + ridges


def term_logdets(fmatrix, eta, config: CriterionConfig) -> np.ndarray:
    fmatrix = np.asarray(fmatrix, dtype=float)
    q = fmatrix.shape[1]
    info = _information(fmatrix, config.term_weights(fmatrix, eta), config.ridges(q))
    return np.array([spd_logdet(A, nm) for A, nm in zip(info, config.names)])


def q_value(design: Design | np.ndarray, eta, config: CriterionConfig) -> float:
    """Criterion value of a design for one eta, computed from scratch."""
    fm = design.fmatrix if isinstance(design, Design) else np.asarray(design, dtype=float)
    return float(config.coefficients @ term_logdets(fm, eta, config))


def efficiency(q1: float, q2: float, q: int) -> float:
    """Per-parameter efficiency exp((Q1 - Q2) / q)."""
    return float(np.exp((q1 - q2) / q))


@dataclass(frozen=True, eq=False)
class FrequencyDesign:
    """Normalized selection frequencies over a candidate set."""

    cands: CandidateSet
    freq: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freq, dtype=float).ravel()
        if f.size != len(self.cands):
            raise ValueError("frequency vector does not match the candidate set")
        if np.any(f < 0) or abs(f.sum() - 1.0) > 1e-12:
            raise ValueError("frequencies must be nonnegative and sum to 1")
        object.__setattr__(self, "freq", f)

    @classmethod
    def from_counts(cls, cands: CandidateSet, counts) -> "FrequencyDesign":
        c = np.asarray(counts, dtype=float)
        return cls(cands, c / c.sum())

    @classmethod
    def from_design(cls, design: Design) -> "FrequencyDesign":
        return cls.from_counts(design.cands, design.counts())


def continuous_q(freq: FrequencyDesign, n: int, eta, config: CriterionConfig) -> float:
    """Criterion of a continuous design scaled to ``n`` runs; ridges added outside the sum."""
    F = freq.cands.fmatrix
    weights = config.term_weights(F, eta) * (n * freq.freq)[None, :]
    info = _information(F, weights, config.ridges(freq.cands.q))
    logdets = np.array([spd_logdet(A, nm) for A, nm in zip(info, config.names)])
    return float(config.coefficients @ logdets)


@dataclass(eq=False)
class CriterionState:
    """Cached inverses and log-determinants of the current design.

    ``M[t]`` is the inverse of term ``t``'s information matrix. Exchanges and
    removals update them with Sherman-Morrison steps and every
    ``refresh_every`` exchanges the state is rebuilt from scratch.
    """

    cands: CandidateSet
    eta: np.ndarray
    config: CriterionConfig
    indices: list[int]
    refresh_every: int = REFRESH_EVERY
    M: np.ndarray = field(init=False)
    logdets: np.ndarray = field(init=False)
    cand_weights: np.ndarray = field(init=False)
    exchanges_since_refresh: int = field(init=False, default=0)

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        self.indices = [int(i) for i in self.indices]
        self.cand_weights = self.config.term_weights(self.cands.fmatrix, self.eta)
        self._coef = self.config.coefficients
        self._ridges = self.config.ridges(self.cands.q)
        self.rebuild()

    # construction -------------------------------------------------------

    def rebuild(self) -> None:
        idx = np.asarray(self.indices, dtype=int)
        F = self.cands.fmatrix[idx]
        info = _information(F, self.cand_weights[:, idx], self._ridges)
        logdets, Ms = [], []
        for A, nm in zip(info, self.config.names):
            logdets.append(spd_logdet(A, nm))
            M = np.linalg.inv(A)
            Ms.append(0.5 * (M + M.T))
        self.M = np.array(Ms)
        self.logdets = np.array(logdets)
        self.exchanges_since_refresh = 0
        self._fm = None

    @property
    def design(self) -> Design:
        return Design(self.cands, np.asarray(self.indices, dtype=int))

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def Q(self) -> float:
        return float(self._coef @ self.logdets)

    @property
    def M0(self) -> np.ndarray:
        return self.M[0]

    @property
    def M1(self) -> np.ndarray:
        return self.M[1]

    @property
    def M2(self) -> np.ndarray:
        return self.M[2]

    def weights(self) -> np.ndarray:
        """(T, n) weights of the current runs."""
        return self.cand_weights[:, self.indices]

    # leverages ----------------------------------------------------------

    def _fmat(self) -> np.ndarray:
        # (T, N, q): rows f(x)' M_t for every candidate
        if self._fm is None:
            self._fm = np.einsum("ni,tij->tnj", self.cands.fmatrix, self.M)
        return self._fm

    def candidate_leverages(self) -> np.ndarray:
        """(T, N) quadratic forms v_t(x) = f(x)' M_t f(x)."""
        return np.einsum("tnj,nj->tn", self._fmat(), self.cands.fmatrix)

    # deletion -----------------------------------------------------------

    def deletion_values(self) -> np.ndarray:
        """d(x_i) for every run; +inf where removal would make a matrix singular."""
        idx = np.asarray(self.indices, dtype=int)
        v = self.candidate_leverages()[:, idx]
        bracket = 1.0 - self.cand_weights[:, idx] * v
        out = np.full(len(idx), np.inf)
        ok = np.all(bracket > SINGULAR_TOL, axis=0)
        out[ok] = -(self._coef @ np.log(bracket[:, ok]))
        return out

    def deletion_value(self, i: int) -> float:
        return float(self.deletion_values()[i])

    # exchange -----------------------------------------------------------

    def exchange_deltas(self, i: int) -> np.ndarray:
        """Criterion change for replacing run ``i`` by every candidate; -inf if infeasible."""
        xi = self.indices[i]
        fm = self._fmat()
        F = self.cands.fmatrix
        v = np.einsum("tnj,nj->tn", fm, F)
        vi = v[:, xi][:, None]
        vx_xi = fm @ F[xi]  # (T, N)
        a = self.cand_weights
        ai = a[:, xi][:, None]
        dets = (1.0 + a * v) * (1.0 - ai * vi) + a * ai * vx_xi**2
        out = np.full(len(self.cands), -np.inf)
        ok = np.all(dets > SINGULAR_TOL, axis=0)
        out[ok] = self._coef @ np.log(dets[:, ok])
        out[xi] = 0.0
        return out

    def exchange_delta(self, candidate: int, i: int) -> float:
        return float(self.exchange_deltas(i)[candidate])

    def _term_dets(self, candidate: int, i: int) -> np.ndarray:
        xi = self.indices[i]
        f, fi = self.cands.fmatrix[candidate], self.cands.fmatrix[xi]
        Mf, Mfi = self.M @ f, self.M @ fi
        v, vi, vx = Mf @ f, Mfi @ fi, Mf @ fi
        a, ai = self.cand_weights[:, candidate], self.cand_weights[:, xi]
        return (1.0 + a * v) * (1.0 - ai * vi) + a * ai * vx**2

    def apply_exchange(self, candidate: int, i: int) -> None:
        """Replace run ``i`` by ``candidate``: rank-one update then rank-one downdate."""
        candidate = int(candidate)
        if candidate == self.indices[i]:
            return
        dets = self._term_dets(candidate, i)
        if np.any(dets <= SINGULAR_TOL):
            raise SingularDesign(
                self.config.names[int(np.argmin(dets))], "exchange would make the design singular"
            )
        xi = self.indices[i]
        f, fi = self.cands.fmatrix[candidate], self.cands.fmatrix[xi]
        ok = self._rank_one(f, self.cand_weights[:, candidate]) and self._rank_one(
            fi, -self.cand_weights[:, xi]
        )
        self.indices[i] = candidate
        self.logdets = self.logdets + np.log(dets)
        self.exchanges_since_refresh += 1
        self._fm = None
        if not ok or self.exchanges_since_refresh >= self.refresh_every:
            self.rebuild()

    def _rank_one(self, f: np.ndarray, w: np.ndarray) -> bool:
        """M_t <- (M_t^-1 + w_t f f')^-1 for every term; False if a downdate loses definiteness."""
        Mf = self.M @ f  # (T, q)
        denom = 1.0 + w * (Mf @ f)
        if np.any(denom <= SINGULAR_TOL):
            return False
        self.M = self.M - (w / denom)[:, None, None] * np.einsum("ti,tj->tij", Mf, Mf)
        return bool(np.all(np.einsum("tii->ti", self.M) > 0))

    # removal / addition -------------------------------------------------

    def remove_point(self, i: int) -> None:
        """Drop run ``i`` with a Sherman-Morrison downdate of every inverse."""
        xi = self.indices[i]
        f = self.cands.fmatrix[xi]
        w = self.cand_weights[:, xi]
        bracket = 1.0 - w * ((self.M @ f) @ f)
        if np.any(bracket <= SINGULAR_TOL):
            raise SingularDesign(
                self.config.names[int(np.argmin(bracket))], f"run {i} is indispensable"
            )
        ok = self._rank_one(f, -w)
        del self.indices[i]
        self.logdets = self.logdets + np.log(bracket)
        self._fm = None
        if not ok:
            self.rebuild()

    def add_point(self, candidate: int) -> None:
        f = self.cands.fmatrix[candidate]
        w = self.cand_weights[:, candidate]
        gain = 1.0 + w * ((self.M @ f) @ f)
        self._rank_one(f, w)
        self.indices.append(int(candidate))
        self.logdets = self.logdets + np.log(gain)
        self._fm = None


def state_init(design: Design, eta, config: CriterionConfig, refresh_every: int = REFRESH_EVERY) -> CriterionState:
    return CriterionState(design.cands, eta, config, list(design.indices), refresh_every)
