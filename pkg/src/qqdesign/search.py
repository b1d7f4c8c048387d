"""Point-exchange search for local designs, baseline designs and global designs."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .criterion import (
    CriterionConfig,
    CriterionState,
    FrequencyDesign,
    SingularDesign,
    q_value,
)
from .factors import CandidateSet, Design, link_prob
from .regularity import prop1_bounds

log = logging.getLogger(__name__)

DEFAULT_FILTER = (0.15, 0.85)
# accepted exchanges must beat roundoff, not just zero
IMPROVE_TOL = 1e-10
MIN_DELETION = 1e-9


class InfeasibleModel(ValueError):
    """No nonsingular design can be formed from the candidate set."""


class SamplingFailed(RuntimeError):
    """Repeated discrete draws from a frequency design were all singular."""


@dataclass(frozen=True)
class SearchConfig:
    n: int
    restarts: int = 10
    max_iterations: int | None = None
    no_improve_window: int | None = None
    pi_filter: tuple[float, float] | None = DEFAULT_FILTER
    kappa_init: float = 0.5
    seed: int | None = None
    polish: bool = True
    refresh_every: int = 32

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("run size must be positive")
        if self.pi_filter is not None:
            lo, hi = self.pi_filter
            if not 0.0 < lo < hi < 1.0:
                raise ValueError("pi_filter must satisfy 0 < lo < hi < 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")

    @property
    def iterations(self) -> int:
        return self.max_iterations if self.max_iterations is not None else 200 * self.n

    @property
    def window(self) -> int:
        return self.no_improve_window if self.no_improve_window is not None else 5 * self.n


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def filter_candidates(cands: CandidateSet, eta, pi_range=DEFAULT_FILTER, link="logit") -> CandidateSet:
    """Keep points with pi(x, eta) inside ``pi_range``; the full set if fewer than q survive."""
    if pi_range is None:
        return cands
    lo, hi = pi_range
    p = np.atleast_1d(link_prob(cands.fmatrix, eta, link))
    keep = np.flatnonzero((p >= lo) & (p <= hi))
    if keep.size < cands.q:
        return cands
    return cands.subset(keep)


def _spans_model(cands: CandidateSet) -> bool:
    return np.linalg.matrix_rank(cands.fmatrix) == cands.q


def _reduce(cands: CandidateSet, eta, config: CriterionConfig) -> list[int]:
    """Greedy backward elimination from the whole candidate set down to q points."""
    try:
        state = CriterionState(cands, eta, config, list(range(len(cands))))
    except SingularDesign as exc:
        raise InfeasibleModel(f"candidate set does not support the model ({exc})") from None
    while state.n > cands.q:
        d = state.deletion_values()
        i = int(np.argmin(d))
        if not np.isfinite(d[i]):
            break
        state.remove_point(i)
    return list(state.indices)


def initial_design(
    cands: CandidateSet,
    n: int,
    eta,
    config: CriterionConfig,
    kappa: float = 0.5,
    seed=None,
    survivors: list[int] | None = None,
) -> Design:
    """Reduction start: q survivors plus n - q replicates drawn in proportion to
    their replication bounds (uniformly for the one-term baseline criteria)."""
    if n < cands.q:
        raise ValueError(f"run size {n} is below the number of effects {cands.q}")
    rng = _rng(seed)
    keep = _reduce(cands, eta, config) if survivors is None else list(survivors)
    extra = n - len(keep)
    if extra > 0:
        if config.kind == "qq":
            pis = np.atleast_1d(link_prob(cands.fmatrix[keep], eta, config.link))
            weights = np.asarray(prop1_bounds(pis, kappa)[0], dtype=float)
        else:
            weights = np.ones(len(keep))
        draws = rng.choice(len(keep), size=extra, p=weights / weights.sum())
        keep = keep + [keep[k] for k in draws]
    elif extra < 0:
        raise InfeasibleModel("reduction stopped above n points")
    return Design(cands, np.asarray(keep, dtype=int))


def _exchange_run(state: CriterionState, rng, iterations: int, window: int) -> int:
    """Randomized point exchange; returns the number of accepted exchanges."""
    stall = accepted = 0
    for _ in range(iterations):
        if stall >= window:
            break
        d = state.deletion_values()
        w = np.where(np.isfinite(d), 1.0 / np.maximum(d, MIN_DELETION), 0.0)
        total = w.sum()
        if total <= 0:
            stall += 1
            continue
        i0 = int(rng.choice(len(w), p=w / total))
        deltas = state.exchange_deltas(i0)
        best = int(np.argmax(deltas))
        if deltas[best] > IMPROVE_TOL:
            state.apply_exchange(best, i0)
            accepted += 1
            stall = 0
        else:
            stall += 1
    return accepted


def _polish(state: CriterionState, max_sweeps: int = 100) -> None:
    """Full exchange sweeps until no single swap improves the criterion."""
    for _ in range(max_sweeps):
        improved = False
        for i in range(state.n):
            deltas = state.exchange_deltas(i)
            best = int(np.argmax(deltas))
            if deltas[best] > IMPROVE_TOL:
                state.apply_exchange(best, i)
                improved = True
        if not improved:
            return


def _search(cands, eta, config: CriterionConfig, search: SearchConfig, rng) -> tuple[np.ndarray, float]:
    survivors = _reduce(cands, eta, config)
    best_idx, best_q = None, -np.inf
    for _ in range(search.restarts):
        start = initial_design(cands, search.n, eta, config, search.kappa_init, rng, survivors)
        state = CriterionState(cands, eta, config, list(start.indices), search.refresh_every)
        _exchange_run(state, rng, search.iterations, search.window)
        if search.polish:
            _polish(state)
        state.rebuild()
        if state.Q > best_q + IMPROVE_TOL:
            best_idx, best_q = np.array(state.indices), state.Q
    return best_idx, best_q


def _working_set(cands: CandidateSet, eta, config: CriterionConfig, pi_filter) -> CandidateSet:
    sub = filter_candidates(cands, eta, pi_filter, config.link) if pi_filter else cands
    if sub is not cands and not _spans_model(sub):
        sub = cands
    return sub


def local_search(
    cands: CandidateSet,
    n: int | None,
    eta,
    config: SearchConfig,
    criterion: CriterionConfig,
) -> tuple[Design, float]:
    """Best local design over restarts; indices refer to ``cands``."""
    if n is not None and n != config.n:
        config = replace(config, n=n)
    rng = _rng(config.seed)
    work = _working_set(cands, eta, criterion, config.pi_filter)
    idx, best = _search(work, eta, criterion, config, rng)
    if work is not cands:
        pos = {int(i): k for k, i in enumerate(cands.ids)}
        idx = np.array([pos[int(work.ids[i])] for i in idx])
    design = Design(cands, np.sort(idx))
    return design, q_value(design, eta, criterion)


def baseline_design(
    kind: str,
    cands: CandidateSet,
    n: int,
    eta,
    criterion: CriterionConfig,
    search: SearchConfig | None = None,
    n_glm: int | None = None,
) -> Design:
    """Comparison designs: "linear" (log det F'F), "glm" (log det F'W0F) or "combined".

    The combined design stacks an ``n_glm``-run logistic design (default 2/3
    of the runs) on a linear design for the remaining runs. Baselines search
    the whole candidate set without probability filtering.
    """
    search = SearchConfig(n=n) if search is None else replace(search, n=n)
    search = replace(search, pi_filter=None)
    if kind in ("linear", "glm"):
        design, _ = local_search(cands, n, eta, search, criterion.with_kind(kind))
        return design
    if kind == "combined":
        n_glm = int(round(2 * n / 3)) if n_glm is None else n_glm
        n_lin = n - n_glm
        rng = _rng(search.seed)
        seeds = rng.integers(2**63, size=2)
        glm = baseline_design("glm", cands, n_glm, eta, criterion, replace(search, seed=int(seeds[0])))
        lin = baseline_design("linear", cands, n_lin, eta, criterion, replace(search, seed=int(seeds[1])))
        return Design(cands, np.sort(np.concatenate([glm.indices, lin.indices])))
    raise ValueError(f"unknown baseline kind {kind!r}")


@dataclass
class GlobalResult:
    freq: FrequencyDesign
    per_eta: list[tuple[int, float, Design]]
    B: int
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def counts(self) -> np.ndarray:
        return np.sum([d.counts() for _, _, d in self.per_eta], axis=0)


def _one_eta(args):
    j, cands, eta, config, criterion = args
    try:
        design, q = local_search(cands, config.n, eta, config, criterion)
    except (SingularDesign, InfeasibleModel) as exc:
        return j, None, str(exc)
    return j, (q, design.indices), None


def global_design(
    cands: CandidateSet,
    n: int,
    eta_samples,
    config: SearchConfig,
    criterion: CriterionConfig,
    threads: int = 1,
    fixed_seed: bool = False,
) -> GlobalResult:
    """Accumulate candidate selection counts of local designs over sampled eta.

    Every eta gets its own seed spawned from ``config.seed`` by sample index,
    so the result does not depend on processing order; ``fixed_seed`` reuses
    ``config.seed`` for every sample instead.
    """
    etas = np.atleast_2d(np.asarray(eta_samples, dtype=float))
    B = len(etas)
    if B < 1:
        raise ValueError("need at least one eta sample")
    config = replace(config, n=n)
    if fixed_seed:
        seeds = [config.seed] * B
    else:
        seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(config.seed).spawn(B)]
    tasks = [(j, cands, etas[j], replace(config, seed=seeds[j]), criterion) for j in range(B)]
    if threads > 1 and B > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_one_eta, tasks))
    else:
        results = [_one_eta(t) for t in tasks]
    per_eta, failures = [], []
    for j, res, err in sorted(results, key=lambda r: r[0]):
        if res is None:
            log.warning("local search failed for eta sample %d: %s", j, err)
            failures.append((j, err))
        else:
            per_eta.append((j, res[0], Design(cands, res[1])))
    if len(failures) > 0.1 * B:
        raise InfeasibleModel(f"{len(failures)} of {B} local searches failed")
    counts = np.sum([d.counts() for _, _, d in per_eta], axis=0)
    return GlobalResult(FrequencyDesign.from_counts(cands, counts), per_eta, B, failures)


def sample_discrete(
    freq: FrequencyDesign,
    n: int,
    seed=None,
    eta=None,
    criterion: CriterionConfig | None = None,
    max_redraws: int = 100,
) -> Design:
    """Draw ``n`` runs with replacement from a frequency design.

    With ``eta`` and ``criterion`` given, singular draws are redrawn up to
    ``max_redraws`` times.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = _rng(seed)
    for _ in range(max_redraws):
        idx = np.sort(rng.choice(len(freq.freq), size=n, p=freq.freq))
        design = Design(freq.cands, idx)
        if eta is None or criterion is None:
            return design
        try:
            q_value(design, eta, criterion)
        except SingularDesign:
            continue
        return design
    raise SamplingFailed(f"{max_redraws} consecutive draws gave singular designs")
