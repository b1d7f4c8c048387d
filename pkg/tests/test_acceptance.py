"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import itertools
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from qqdesign import (
    CriterionConfig,
    Design,
    Effect,
    FactorKind,
    FactorSpec,
    ModelSpec,
    SearchConfig,
    SingularDesign,
    baseline_design,
    correlation_matrix,
    efficiency,
    full_factorial,
    global_design,
    link_prob,
    local_search,
    prop1_bounds,
    prop2_bounds,
    q_value,
    sample_eta,
    state_init,
)
from qqdesign.criterion import spd_logdet
from qqdesign.io import data_path, load_config
from qqdesign.priors import full_basis_order


def best_time(fn, repeats=20):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


# 1 -------------------------------------------------------------------------

def test_01_replication_bounds(verdict):
    pis = [1 / (1 + math.exp(-(1 + x))) for x in (-1, 0, 1)]
    (s50, _), t50 = best_time(lambda: prop1_bounds(pis, 0.5))
    (s90, _), t90 = best_time(lambda: prop1_bounds(pis, 0.9))
    ok = s50 == [2, 4, 7] and s90 == [5, 9, 20] and max(t50, t90) < 1e-3
    verdict(ok, f"kappa=0.5 -> {s50}, kappa=0.9 -> {s90}, {max(t50, t90) * 1e6:.0f} us")


# 2 -------------------------------------------------------------------------

def test_02_run_size_bounds(verdict, note, ref_designs, eta_ref):
    d = ref_designs["D_QQ_rho0"]
    distinct = np.unique(d.indices)
    p = link_prob(d.cands.fmatrix[distinct], eta_ref)
    m = len(distinct)
    res, t = best_time(lambda: prop2_bounds(m, 22, float(p.min()), float(p.max())))
    res50 = prop2_bounds(50, 22, float(p.min()), float(p.max()))
    note(f"bundled design has m = {m} distinct points; bounds at m={m}: {res}, at m=50: {res50}")
    ok = res[0] == res50[0] == 7 and res[2] == res50[2] == 1 and t < 1e-2
    verdict(ok, f"n0_sufficient = {res[0]}, n0_necessary = {res[2]}, {t * 1e6:.0f} us")


# 3 -------------------------------------------------------------------------

def test_03_link_check(verdict):
    miss = 1 - link_prob(np.array([1.0, 1.0]), np.array([1.0, 1.0]))
    verdict(round(miss, 2) == 0.12, f"1 - pi = {miss:.4f}")


# 4 -------------------------------------------------------------------------

TARGET_EFF = {0.0: (1.08, 1.11, 1.05), 0.3: (1.10, 1.14, 1.07)}


def test_04_local_vs_baseline_efficiencies(verdict, note, model, cands, eta_ref, ref_designs):
    t0 = time.perf_counter()
    lines, ok = [], True
    for rho, reference in TARGET_EFF.items():
        crit = CriterionConfig.from_model(model, rho=rho)
        # unfiltered search: the reference local design itself uses points
        # outside the probability filter, and filtering lowers the optimum
        search = SearchConfig(n=66, restarts=10, seed=2024, pi_filter=None)
        dqq, qqq = local_search(cands, 66, eta_ref, search, crit)
        effs = []
        for kind in ("linear", "glm", "combined"):
            base = baseline_design(kind, cands, 66, eta_ref, crit, search)
            effs.append(efficiency(qqq, q_value(base, eta_ref, crit), model.q))
        good = all(abs(e - t) <= 0.05 for e, t in zip(effs, reference)) and all(e > 1 for e in effs)
        ok &= good
        lines.append(f"rho={rho}: (D_L, D_G, D_C) = ({effs[0]:.3f}, {effs[1]:.3f}, {effs[2]:.3f}) "
                     f"vs {reference}")
        col = "D_QQ_rho0" if rho == 0 else "D_QQ_rho0.3"
        pub_q = q_value(ref_designs[col], eta_ref, crit)
        pub = [efficiency(pub_q, q_value(ref_designs[k], eta_ref, crit), model.q) for k in ("D_L", "D_G", "D_C")]
        note(f"rho={rho}: searched Q = {qqq:.4f}, bundled D_QQ Q = {pub_q:.4f}; bundled designs give "
             f"(D_L, D_G, D_C) = ({pub[0]:.3f}, {pub[1]:.3f}, {pub[2]:.3f})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    verdict(ok, "; ".join(lines) + f"; {elapsed:.0f} s")


# 5 -------------------------------------------------------------------------

def _random_nonsingular(cands, n, rng):
    while True:
        idx = rng.choice(len(cands), size=n)
        if np.linalg.matrix_rank(cands.fmatrix[idx]) == cands.q:
            return Design(cands, idx)


def test_05_incremental_vs_oracle(verdict, model, cands):
    exp = load_config(data_path("artificial.json"))
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    worst, checked = 0.0, {"exchange": 0, "deletion": 0, "remove": 0}
    while min(checked.values()) < 400:
        rho = [0.0, 0.3][int(rng.integers(2))]
        crit = CriterionConfig.from_model(model, rho=rho)
        eta = sample_eta(exp.eta_prior, 1, "iid", seed=rng)[0]
        d = _random_nonsingular(cands, int(rng.integers(26, 73)), rng)
        st = state_init(d, eta, crit)
        q0 = st.Q
        tol = 1e-8 * (1 + abs(q0))
        i = int(rng.integers(d.n))
        op = ["exchange", "deletion", "remove"][int(rng.integers(3))]
        if op == "exchange":
            c = int(rng.integers(len(cands)))
            inc = st.exchange_delta(c, i)
            idx = d.indices.copy()
            idx[i] = c
        else:
            inc = -st.deletion_value(i)
            idx = np.delete(d.indices, i)
        try:
            scratch = q_value(Design(cands, idx), eta, crit) - q0
        except SingularDesign:
            continue
        if not np.isfinite(inc):
            continue
        if op == "remove":
            st.remove_point(i)
            inc = st.Q - q0
        worst = max(worst, abs(inc - scratch) / tol)
        checked[op] += 1
    # drift after 1000 accepted exchanges with periodic refresh
    crit = CriterionConfig.from_model(model, rho=0.3)
    eta = sample_eta(exp.eta_prior, 1, "iid", seed=rng)[0]
    st = state_init(_random_nonsingular(cands, 66, rng), eta, crit)
    done = 0
    while done < 1000:
        i, c = int(rng.integers(st.n)), int(rng.integers(len(cands)))
        if np.isfinite(st.exchange_delta(c, i)):
            st.apply_exchange(c, i)
            done += 1
    ref = state_init(st.design, eta, crit)
    drift = float(np.abs(st.M - ref.M).max())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.0 and drift <= 1e-6 and sum(checked.values()) >= 1000 and elapsed < 120
    verdict(ok, f"{sum(checked.values())} triples {checked}, worst error/tolerance = {worst:.2e}, "
                f"M drift = {drift:.2e}, {elapsed:.1f} s")


# 6 -------------------------------------------------------------------------

def test_06_brute_force_optimality(verdict):
    factor = FactorSpec("x", "quantitative")
    model = ModelSpec.from_labels([factor], ["(Intercept)", "x.l"])
    cands = full_factorial(model)
    crit = CriterionConfig.from_model(model, rho=0.0)
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        eta = rng.uniform(-2, 2, 2)
        for n in (3, 4, 5):
            best = -np.inf
            for combo in itertools.combinations_with_replacement(range(3), n):
                try:
                    best = max(best, q_value(cands.fmatrix[list(combo)], eta, crit))
                except SingularDesign:
                    pass
            _, q = local_search(cands, n, eta, SearchConfig(n=n, seed=1, pi_filter=None), crit)
            worst = max(worst, abs(q - best))
    elapsed = time.perf_counter() - t0
    verdict(worst <= 1e-10 and elapsed < 10, f"max |Q_search - Q_enum| = {worst:.1e} over 60 cases, {elapsed:.1f} s")


# 7 -------------------------------------------------------------------------

SMALL_MODELS = [
    (["quantitative"], ["(Intercept)", "f0.l"]),
    (["quantitative"], ["(Intercept)", "f0.l", "f0.q"]),
    (["two-level", "two-level"], ["(Intercept)", "f0", "f1"]),
    (["two-level", "two-level"], ["(Intercept)", "f0", "f1", "f0:f1"]),
]


def _small_case(rng):
    kinds, labels = SMALL_MODELS[int(rng.integers(len(SMALL_MODELS)))]
    factors = [FactorSpec(f"f{j}", k) for j, k in enumerate(kinds)]
    model = ModelSpec.from_labels(factors, labels)
    n = int(rng.integers(model.q + 1, 13))
    return model, _random_nonsingular(full_factorial(model), n, rng), rng.uniform(-1, 1, model.q)


def test_07_jensen_bound(verdict, note):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    lines, ok = [], True
    for case in range(5):
        model, d, eta = _small_case(rng)
        F = d.fmatrix
        p = link_prob(F, eta)
        Rinv = np.linalg.inv(correlation_matrix(model))
        for rho in (0.0, 0.3):
            ridge = rho * Rinv
            z = (rng.random((10_000, len(p))) < p).astype(float)
            for w, pw in ((z, p), (1 - z, 1 - p)):
                bound = spd_logdet(F.T @ (F * pw[:, None]) + ridge)
                vals = []
                for row in w:
                    sign, ld = np.linalg.slogdet(F.T @ (F * row[:, None]) + ridge)
                    # at rho = 0 keep only draws whose conditional model is estimable
                    if rho > 0 or (sign > 0 and np.linalg.matrix_rank(F[row > 0]) == model.q):
                        vals.append(ld)
                vals = np.array(vals)
                se = vals.std(ddof=1) / np.sqrt(len(vals))
                excess = (vals.mean() - bound) / se
                ok &= excess <= 3
                lines.append(f"q={model.q} n={d.n} rho={rho}: {excess:+.1f} SE "
                             f"({1 - len(vals) / len(w):.0%} singular draws dropped)")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    for line in lines:
        note(line)
    verdict(ok, f"MC mean minus plug-in bound within 3 SE for all 20 terms: {ok}, {elapsed:.1f} s")


# 8 -------------------------------------------------------------------------

def test_08_prior_structure(verdict):
    t0 = time.perf_counter()
    two = [FactorSpec("a", "two-level"), FactorSpec("b", "two-level")]
    R = correlation_matrix(ModelSpec(two, tuple(Effect(b) for b in full_basis_order(two))), 1 / 3)
    diag_ok = np.allclose(R, np.diag([1, 1 / 3, 1 / 3, 1 / 9]))
    rng = np.random.default_rng(8)
    pd_ok = True
    for _ in range(100):
        factors = [FactorSpec(f"f{j}", list(FactorKind)[int(rng.integers(3))]) for j in range(int(rng.integers(1, 5)))]
        basis = full_basis_order(factors)
        keep = [0] + sorted(rng.choice(np.arange(1, len(basis)), size=min(len(basis) - 1, int(rng.integers(1, 15))), replace=False))
        model = ModelSpec(factors, tuple(Effect(basis[k]) for k in keep))
        R = correlation_matrix(model, float(rng.uniform(0.05, 1.0)))
        pd_ok &= R[0, 0] == 1.0 and np.linalg.eigvalsh(R).min() > 0
    three = [FactorSpec(n, "two-level") for n in "abc"]
    ident_ok = np.allclose(correlation_matrix(ModelSpec(three, tuple(Effect(b) for b in full_basis_order(three))), 1.0), np.eye(8))
    elapsed = time.perf_counter() - t0
    verdict(diag_ok and pd_ok and ident_ok and elapsed < 1,
            f"diag {diag_ok}, 100 random PD with unit corner {pd_ok}, zeta=0 identity {ident_ok}, {elapsed * 1e3:.0f} ms")


# 9 -------------------------------------------------------------------------

def test_09_global_pattern(verdict):
    exp = load_config(data_path("artificial.json"))
    t0 = time.perf_counter()
    etas = sample_eta(exp.eta_prior, 50, exp.sampling, seed=exp.search.seed)
    search = replace(exp.search, pi_filter=None)
    res = global_design(exp.cands, 66, etas, search, exp.criterion)
    f = res.freq.freq
    x4, x5 = exp.cands.points[:, 3], exp.cands.points[:, 4]
    mid, edge = f[x5 == 0].mean(), f[x5 != 0].mean()
    x5_gap = edge - mid
    x4_means = [f[x4 == lv].mean() for lv in (-1, 0, 1)]
    x4_gap = max(x4_means) - min(x4_means)
    elapsed = time.perf_counter() - t0
    ok = mid < edge and 3 * x4_gap <= x5_gap and elapsed < 900
    verdict(ok, f"x5: mean freq at 0 = {mid:.4f}, at +-1 = {edge:.4f}; x4 level-mean range = {x4_gap:.5f} "
                f"vs x5 gap {x5_gap:.5f}; {elapsed:.0f} s")


# 10 ------------------------------------------------------------------------

@pytest.mark.parametrize("rho", [0.0, 0.3])
def test_10_efficiency_dominance(verdict, note, rho):
    exp = load_config(data_path("artificial.json"))
    crit = CriterionConfig.from_model(exp.model, rho=rho)
    etas = sample_eta(exp.eta_prior, 20, exp.sampling, seed=exp.search.seed)
    t0 = time.perf_counter()
    effs, filtered = [], []
    for j, eta in enumerate(etas):
        search = SearchConfig(n=66, restarts=10, seed=j, pi_filter=None)
        _, qqq = local_search(exp.cands, 66, eta, search, crit)
        dc = baseline_design("combined", exp.cands, 66, eta, crit, search)
        qc = q_value(dc, eta, crit)
        effs.append(efficiency(qqq, qc, exp.model.q))
        _, qf = local_search(exp.cands, 66, eta, SearchConfig(n=66, restarts=10, seed=j), crit)
        filtered.append(efficiency(qf, qc, exp.model.q))
    effs, filtered = np.array(effs), np.array(filtered)
    elapsed = time.perf_counter() - t0
    note(f"with the default [0.15, 0.85] probability filter the share above 1 is {np.mean(filtered > 1):.2f} "
         f"(median {np.median(filtered):.3f})")
    share = float(np.mean(effs > 1))
    verdict(share >= 0.95 and elapsed < 900,
            f"share of eff(D_QQ, D_C) > 1 = {share:.2f}, min {effs.min():.4f}, median {np.median(effs):.4f}, {elapsed:.0f} s")
