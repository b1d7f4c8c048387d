"""Bayesian D-optimal designs for experiments with one continuous and one binary response."""

from .factors import (
    CandidateSet,
    Design,
    Effect,
    FactorKind,
    FactorSpec,
    Link,
    ModelSpec,
    encode_effect_columns,
    expand_model,
    full_factorial,
    full_quadratic,
    link_prob,
    weight_diagonals,
)
from .priors import EtaBox, EtaNormal, correlation_matrix, sample_eta
from .criterion import (
    CriterionConfig,
    CriterionState,
    FrequencyDesign,
    SingularDesign,
    continuous_q,
    efficiency,
    q_value,
    state_init,
)
from .regularity import BoundsReport, prop1_bounds, prop2_bounds
from .search import (
    GlobalResult,
    InfeasibleModel,
    SamplingFailed,
    SearchConfig,
    baseline_design,
    filter_candidates,
    global_design,
    initial_design,
    local_search,
    sample_discrete,
)

__version__ = "0.1.0"
