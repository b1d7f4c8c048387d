import csv

import numpy as np
import pytest

from qqdesign import Design, FactorSpec, full_factorial, full_quadratic
from qqdesign.io import data_path, read_eta

ARTIFICIAL_FACTORS = [
    FactorSpec("x1", "two-level"),
    FactorSpec("x2", "two-level"),
    FactorSpec("x3", "two-level"),
    FactorSpec("x4", "categorical"),
    FactorSpec("x5", "quantitative"),
]


@pytest.fixture(scope="session")
def model():
    return full_quadratic(ARTIFICIAL_FACTORS)


@pytest.fixture(scope="session")
def cands(model):
    return full_factorial(model)


@pytest.fixture(scope="session")
def eta_ref(model):
    return read_eta(data_path("reference_eta.csv"), model)[0]


def load_reference_designs(cands):
    """Reference comparison designs as Design objects keyed by column name."""
    with open(data_path("reference_designs.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    names = [f.name for f in cands.model.factors]
    pts = [[int(r[n]) for n in names] for r in rows]
    idx = cands.locate(pts)
    out = {}
    for col in ("D_QQ_rho0", "D_QQ_rho0.3", "D_G", "D_L", "D_C"):
        counts = np.array([int(r[col]) for r in rows])
        out[col] = Design(cands, np.repeat(idx, counts))
    return out


@pytest.fixture(scope="session")
def ref_designs(cands):
    return load_reference_designs(cands)


@pytest.fixture
def verdict(request, capsys):
    """Print a PASS/FAIL line straight to the terminal, then assert."""

    def _verdict(ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[{request.node.name}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return _verdict


@pytest.fixture
def note(request, capsys):
    """Informational line printed next to a verdict."""

    def _note(text: str):
        with capsys.disabled():
            print(f"\n[{request.node.name}] info: {text}")

    return _note
