import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from qqdesign import (
    CandidateSet,
    Design,
    Effect,
    FactorKind,
    FactorSpec,
    ModelSpec,
    encode_effect_columns,
    expand_model,
    full_factorial,
    full_quadratic,
    link_prob,
)
from qqdesign.factors import point_weights
from qqdesign.io import data_path
from qqdesign.priors import full_basis_order

from conftest import ARTIFICIAL_FACTORS

kinds = st.sampled_from(list(FactorKind))


@pytest.mark.parametrize("kind", list(FactorKind))
def test_coding_columns_are_orthogonal(kind):
    C = kind.coding
    assert np.allclose(C.T @ C, len(kind.levels) * np.eye(len(kind.levels)))


def test_encode_effect_columns_values():
    assert encode_effect_columns(FactorSpec("a", "two-level"), 1) == (1.0,)
    lin, quad = encode_effect_columns(FactorSpec("b", "quantitative"), 0)
    assert lin == 0.0 and quad == pytest.approx(-np.sqrt(2))
    with pytest.raises(ValueError):
        encode_effect_columns(FactorSpec("a", "two-level"), 0)


def test_full_quadratic_matches_bundled_effect_list(model):
    header = open(data_path("reference_eta.csv")).readline().strip().split(",")
    assert model.q == 22
    assert model.labels == header


def test_effect_order_counts_quadratic_twice(model):
    orders = {lab: e.order(model.factors) for lab, e in zip(model.labels, model.effects)}
    assert orders["(Intercept)"] == 0
    assert orders["x4.2"] == 1
    assert orders["x5.q"] == 2
    assert orders["x1:x4.2"] == 2


def test_from_labels_round_trip(model):
    again = ModelSpec.from_labels(model.factors, model.labels)
    assert again.effects == model.effects
    with pytest.raises(ValueError):
        ModelSpec.from_labels(model.factors, ["(Intercept)", "x9"])


def test_full_factorial_first_factor_fastest(cands):
    assert len(cands) == 72
    assert cands.points[0].tolist() == [-1, -1, -1, -1, -1]
    assert cands.points[1].tolist() == [1, -1, -1, -1, -1]
    assert cands.points[2].tolist() == [-1, 1, -1, -1, -1]
    assert cands.points[-1].tolist() == [1, 1, 1, 1, 1]
    assert len({tuple(p) for p in cands.points}) == 72


@settings(max_examples=40, deadline=None)
@given(st.lists(kinds, min_size=1, max_size=3), st.data())
def test_expand_model_matches_kronecker_basis(kind_list, data):
    factors = [FactorSpec(f"f{i}", k) for i, k in enumerate(kind_list)]
    basis = full_basis_order(factors)
    model = ModelSpec(factors, tuple(Effect(b) for b in basis))
    point = [data.draw(st.sampled_from(f.levels)) for f in factors]
    kron = np.ones(1)
    for f, lv in zip(factors, point):
        kron = np.kron(f.kind.coding[f.level_index(lv)], kron)
    assert np.allclose(expand_model(point, model), kron)


def test_candidate_locate_and_subset(cands):
    idx = cands.locate([[1, 1, 1, 0, 0], [-1, -1, -1, -1, -1]])
    assert idx.tolist()[1] == 0
    sub = cands.subset([5, 7])
    assert sub.ids.tolist() == [5, 7]
    with pytest.raises(ValueError):
        cands.locate([[0, 0, 0, 0, 0]])


def test_design_counts_and_distinct_points(cands):
    d = Design(cands, [3, 3, 5, 70])
    assert d.n == 4 and d.m == 3
    assert d.counts()[3] == 2
    with pytest.raises(ValueError):
        Design(cands, [72])


def test_link_prob_logit_and_probit():
    f = np.array([1.0, 1.0])
    eta = np.array([1.0, 1.0])
    assert link_prob(f, eta) == pytest.approx(1 / (1 + np.exp(-2)))
    assert link_prob(f, eta, "probit") == pytest.approx(norm.cdf(2))
    assert link_prob(f, np.array([1e4, 0.0])) == pytest.approx(1 - 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-8, 8), min_size=2, max_size=2), st.sampled_from(["logit", "probit"]))
def test_weights_identities(eta, link):
    F = full_factorial([FactorSpec("a", "quantitative")]).fmatrix
    w0, w1, w2 = point_weights(F, np.r_[eta, 0.0], link)
    assert np.allclose(w1 + w2, 1.0)
    assert np.all(w0 > 0)
    if link == "logit":
        assert np.allclose(w0, w1 * w2)
    else:
        # probit Fisher weight never exceeds 2/pi
        assert np.all(w0 <= 2 / np.pi + 1e-12)


def test_candidate_set_from_points_matches_factorial(model, cands):
    again = CandidateSet.from_points(model, cands.points)
    assert np.array_equal(again.fmatrix, cands.fmatrix)


def test_full_quadratic_quantitative_interactions_use_linear_column_only():
    factors = [FactorSpec("a", "quantitative"), FactorSpec("b", "quantitative")]
    labels = full_quadratic(factors).labels
    assert sorted(labels) == sorted(["(Intercept)", "a.l", "a.q", "b.l", "b.q", "a.l:b.l"])
    assert "x4.1:x5.l" in full_quadratic(ARTIFICIAL_FACTORS).labels
