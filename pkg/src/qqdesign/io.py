"""Experiment configs (JSON) and tabular artifacts (CSV)."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .criterion import CriterionConfig, FrequencyDesign
from .factors import CandidateSet, Design, FactorSpec, ModelSpec, full_factorial, full_quadratic
from .priors import EtaBox, EtaNormal, correlation_matrix
from .search import SearchConfig


class ConfigError(ValueError):
    """Unreadable input or a config that violates the schema."""


def data_path(name: str) -> Path:
    """Path of a bundled data file."""
    return Path(str(resources.files("qqdesign") / "data" / name))


def _schema() -> dict:
    return json.loads(data_path("schema.json").read_text())


def fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class Experiment:
    """A parsed config: factors, model, candidates, criterion, eta prior, search settings."""

    raw: dict
    base_dir: Path
    model: ModelSpec
    cands: CandidateSet
    criterion: CriterionConfig
    eta_prior: EtaBox | EtaNormal | None
    eta_samples_path: Path | None
    search: SearchConfig
    B: int
    sampling: str

    @property
    def factors(self) -> tuple[FactorSpec, ...]:
        return self.model.factors

    def search_config(self, **overrides) -> SearchConfig:
        kw = {k: v for k, v in overrides.items() if v is not None}
        return SearchConfig(**{**self.search.__dict__, **kw})


def _box_from_config(model: ModelSpec, spec: dict) -> EtaBox:
    by_order = {int(k): v for k, v in spec.get("by_order", {}).items()}
    overrides = spec.get("effects", {})
    labels = model.labels
    unknown = set(overrides) - set(labels)
    if unknown:
        raise ConfigError(f"eta_prior.box.effects: unknown effect(s) {sorted(unknown)}")
    lo, hi = [], []
    for e, lab in zip(model.effects, labels):
        if lab in overrides:
            interval = overrides[lab]
        else:
            order = e.order(model.factors)
            known = [o for o in by_order if o <= order]
            if not known:
                raise ConfigError(f"eta_prior.box: no bounds for effect {lab!r} of order {order}")
            interval = by_order[max(known)]
        lo.append(interval[0])
        hi.append(interval[1])
    try:
        return EtaBox(np.array(lo), np.array(hi))
    except ValueError as exc:
        raise ConfigError(f"eta_prior.box: {exc}") from None


def load_config(path) -> Experiment:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(raw, path.parent)


def parse_config(raw: dict, base_dir=".") -> Experiment:
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "(root)"
        raise ConfigError(f"config field {where}: {exc.message}") from None
    base_dir = Path(base_dir)
    factors = [FactorSpec(f["name"], f["kind"]) for f in raw["factors"]]
    if len({f.name for f in factors}) != len(factors):
        raise ConfigError("config field factors: duplicate factor names")
    try:
        if raw["model"] == "full-quadratic":
            model = full_quadratic(factors)
        else:
            model = ModelSpec.from_labels(factors, raw["model"])
    except ValueError as exc:
        raise ConfigError(f"config field model: {exc}") from None

    crit = raw.get("criterion", {})
    prior = raw.get("eta_prior", {})
    if sum(k in prior for k in ("box", "normal", "samples")) > 1:
        raise ConfigError("config field eta_prior: give only one of box, normal, samples")
    eta_prior, samples = None, None
    rho0 = crit.get("rho0", 0.0)
    R0inv = None
    if "box" in prior:
        eta_prior = _box_from_config(model, prior["box"])
    elif "normal" in prior:
        diag = np.diag(correlation_matrix(model, prior["normal"].get("decay", 1.0)))
        eta_prior = EtaNormal(prior["normal"]["variance"], diag)
        R0inv = np.diag(1.0 / diag)
        if "rho0" not in crit:
            rho0 = eta_prior.precision_ratio
    elif "samples" in prior:
        samples = base_dir / prior["samples"]

    criterion = CriterionConfig.from_model(
        model,
        rho=crit.get("rho", 0.0),
        r1=crit.get("r1", 1.0 / 3.0),
        r2=crit.get("r2"),
        link=crit.get("link", "logit"),
        rho0=rho0,
        R0inv=R0inv,
    )
    s = dict(raw.get("search", {}))
    B = s.pop("B", 500)
    sampling = s.pop("sampling", "maximin-lhs")
    if "pi_filter" in s and s["pi_filter"] is not None:
        s["pi_filter"] = tuple(s["pi_filter"])
    s.setdefault("n", 2 * model.q)
    try:
        search = SearchConfig(**s)
    except ValueError as exc:
        raise ConfigError(f"config field search: {exc}") from None
    if search.n < model.q:
        raise ConfigError(f"config field search.n: run size {search.n} is below q = {model.q}")
    return Experiment(raw, base_dir, model, full_factorial(model), criterion, eta_prior,
                      samples, search, B, sampling)


# CSV ---------------------------------------------------------------------

def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise ConfigError(f"{path} is empty")
    return rows[0], rows[1:]


def read_eta(path, model: ModelSpec) -> np.ndarray:
    """Eta samples (rows) from a CSV whose header holds effect labels."""
    header, rows = _read_rows(path)
    missing = [lab for lab in model.labels if lab not in header]
    if missing:
        raise ConfigError(f"{path}: missing effect column(s) {missing}")
    cols = [header.index(lab) for lab in model.labels]
    try:
        out = np.array([[float(r[c]) for c in cols] for r in rows], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: bad eta value ({exc})") from None
    if out.size == 0:
        raise ConfigError(f"{path}: no eta rows")
    return out.reshape(-1, model.q)


def write_eta(path, etas, model: ModelSpec) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(model.labels)
        for row in np.atleast_2d(etas):
            w.writerow([fmt(v) for v in row])


def write_design(path, design: Design) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f.name for f in design.cands.model.factors])
        for p in design.points:
            w.writerow([int(v) for v in p])


def read_design(path, cands: CandidateSet) -> Design:
    header, rows = _read_rows(path)
    names = [f.name for f in cands.model.factors]
    missing = [n for n in names if n not in header]
    if missing:
        raise ConfigError(f"{path}: missing factor column(s) {missing}")
    cols = [header.index(n) for n in names]
    try:
        pts = [[int(float(r[c])) for c in cols] for r in rows]
        return Design(cands, cands.locate(pts))
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def write_frequency(path, freq: FrequencyDesign) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["point"] + [f.name for f in freq.cands.model.factors] + ["frequency"])
        for i, (p, f) in enumerate(zip(freq.cands.points, freq.freq)):
            w.writerow([i + 1] + [int(v) for v in p] + [fmt(f)])


def read_frequency(path, cands: CandidateSet) -> FrequencyDesign:
    header, rows = _read_rows(path)
    if "frequency" not in header:
        raise ConfigError(f"{path}: no frequency column")
    names = [f.name for f in cands.model.factors]
    cols = [header.index(n) for n in names if n in header]
    if len(cols) != len(names):
        raise ConfigError(f"{path}: missing factor columns")
    fcol = header.index("frequency")
    freq = np.zeros(len(cands))
    try:
        idx = cands.locate([[int(float(r[c])) for c in cols] for r in rows])
        for i, r in zip(idx, rows):
            freq[i] += float(r[fcol])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    total = freq.sum()
    if total <= 0 or np.any(freq < 0):
        raise ConfigError(f"{path}: frequencies must be nonnegative with a positive total")
    # leave already-normalized files untouched so round trips are bit exact
    return FrequencyDesign(cands, freq if abs(total - 1.0) <= 1e-12 else freq / total)


def is_frequency_file(path) -> bool:
    header, _ = _read_rows(path)
    return "frequency" in header


def write_candidates(path, cands: CandidateSet) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["point"] + [f.name for f in cands.model.factors] + cands.model.labels)
        for i, (p, row) in enumerate(zip(cands.points, cands.fmatrix)):
            w.writerow([i + 1] + [int(v) for v in p] + [fmt(v) for v in row])


def write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2, default=_json_default)
    if path is None or str(path) == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")
