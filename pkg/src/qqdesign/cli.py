"""Command-line front end.

Every subcommand reads a JSON experiment config (``-c``) and writes CSV or
JSON artifacts. Exit status is 0 on success, 2 for unreadable or invalid
input and 3 when the numerics are infeasible (singular designs, a model the
candidates cannot support, or discrete sampling that keeps failing).

Examples::

    qqdesign candidates -c artificial.json -o cands.csv
    qqdesign bounds -c artificial.json --eta eta.csv --kappa 0.5
    qqdesign local -c artificial.json --eta eta.csv -o design.csv --report report.json
    qqdesign global -c artificial.json -o freq.csv --report report.json --B 50
    qqdesign baselines -c artificial.json --eta eta.csv -o baselines/
    qqdesign efficiency -c artificial.json --design-a a.csv --design-b b.csv \\
        --eta-samples etas.csv -o eff.csv
    qqdesign sample -c artificial.json --freq freq.csv -n 66 -o design.csv
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .criterion import SingularDesign, continuous_q, efficiency, q_value, term_logdets
from .factors import link_prob
from .priors import sample_eta
from .regularity import BoundsReport
from .search import (
    InfeasibleModel,
    SamplingFailed,
    baseline_design,
    global_design,
    local_search,
    sample_discrete,
)

log = logging.getLogger("qqdesign")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _single_eta(args, exp: io.Experiment) -> np.ndarray:
    if args.eta is not None:
        etas = io.read_eta(args.eta, exp.model)
        if len(etas) > 1:
            log.info("%s holds %d rows; using the first", args.eta, len(etas))
        return etas[0]
    if exp.eta_prior is not None:
        log.info("no --eta given; using the prior center")
        return exp.eta_prior.center
    raise io.ConfigError("no eta given: pass --eta or configure eta_prior")


def _eta_samples(args, exp: io.Experiment, seed) -> np.ndarray:
    path = getattr(args, "eta_samples", None) or exp.eta_samples_path
    if path is not None:
        return io.read_eta(path, exp.model)
    if exp.eta_prior is None:
        raise io.ConfigError("no eta samples: pass --eta-samples or configure eta_prior")
    B = args.B if getattr(args, "B", None) is not None else exp.B
    return sample_eta(exp.eta_prior, B, exp.sampling, seed)


def _search_config(args, exp: io.Experiment, **extra):
    return exp.search_config(seed=args.seed, restarts=getattr(args, "restarts", None), **extra)


def _design_report(design, eta, exp: io.Experiment) -> dict:
    logdets = term_logdets(design.fmatrix, eta, exp.criterion)
    return {
        "Q": float(exp.criterion.coefficients @ logdets),
        "term_logdets": dict(zip(exp.criterion.names, logdets.tolist())),
        "n": design.n,
        "distinct_points": design.m,
        "eta": dict(zip(exp.model.labels, np.asarray(eta, dtype=float).tolist())),
        "runs": [dict(zip([f.name for f in exp.factors], map(int, p))) for p in design.points],
    }


# subcommands ---------------------------------------------------------------

def cmd_candidates(args, exp):
    io.write_candidates(args.output, exp.cands)
    print(f"wrote {len(exp.cands)} candidates x {exp.model.q} effects to {args.output}")


def cmd_bounds(args, exp):
    eta = _single_eta(args, exp)
    if args.design is not None:
        design = io.read_design(args.design, exp.cands)
        fm = exp.cands.fmatrix[np.unique(design.indices)]
    else:
        fm = exp.cands.fmatrix
    pis = np.atleast_1d(link_prob(fm, eta, exp.criterion.link))
    io.write_json(args.output, BoundsReport.compute(pis, exp.model.q, args.kappa).to_dict())


def cmd_local(args, exp):
    eta = _single_eta(args, exp)
    cfg = _search_config(args, exp, n=args.n)
    t0 = time.perf_counter()
    design, q = local_search(exp.cands, cfg.n, eta, cfg, exp.criterion)
    io.write_design(args.output, design)
    report = _design_report(design, eta, exp)
    report.update(seed=cfg.seed, restarts=cfg.restarts, seconds=time.perf_counter() - t0)
    if args.report:
        io.write_json(args.report, report)
    print(f"Q = {q:.6f} with n = {design.n} runs on {design.m} distinct points")


def cmd_global(args, exp):
    cfg = _search_config(args, exp, n=args.n)
    etas = _eta_samples(args, exp, cfg.seed)
    if args.eta_out:
        io.write_eta(args.eta_out, etas, exp.model)
    t0 = time.perf_counter()
    res = global_design(exp.cands, cfg.n, etas, cfg, exp.criterion, threads=args.threads)
    io.write_frequency(args.output, res.freq)
    if args.report:
        io.write_json(args.report, {
            "B": res.B,
            "n": cfg.n,
            "seed": cfg.seed,
            "failures": [{"sample": j, "error": e} for j, e in res.failures],
            "local_Q": [{"sample": j, "Q": q} for j, q, _ in res.per_eta],
            "counts": res.counts.astype(int).tolist(),
            "seconds": time.perf_counter() - t0,
        })
    print(f"global design from {res.B - len(res.failures)} of {res.B} local searches")


def cmd_baselines(args, exp):
    eta = _single_eta(args, exp)
    n = args.n if args.n is not None else exp.search.n
    cfg = _search_config(args, exp, n=n)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    report = {}
    for (kind, name), ss in zip((("linear", "D_L"), ("glm", "D_G"), ("combined", "D_C")), seeds):
        sub = replace(cfg, seed=int(ss.generate_state(1)[0]))
        design = baseline_design(kind, exp.cands, n, eta, exp.criterion, sub)
        io.write_design(out / f"{name}.csv", design)
        report[name] = {"Q": q_value(design, eta, exp.criterion), "distinct_points": design.m}
    io.write_json(out / "baselines.json", report)
    for name, r in report.items():
        print(f"{name}: Q = {r['Q']:.6f}")


def _criterion_fn(path, exp: io.Experiment, n: int):
    if io.is_frequency_file(path):
        freq = io.read_frequency(path, exp.cands)
        return lambda eta: continuous_q(freq, n, eta, exp.criterion)
    design = io.read_design(path, exp.cands)
    return lambda eta: q_value(design, eta, exp.criterion)


def cmd_efficiency(args, exp):
    if args.eta_samples is None and args.eta is not None:
        etas = io.read_eta(args.eta, exp.model)
    else:
        etas = _eta_samples(args, exp, args.seed if args.seed is not None else exp.search.seed)
    n = args.n if args.n is not None else exp.search.n
    qa = _criterion_fn(args.design_a, exp, n)
    qb = _criterion_fn(args.design_b, exp, n)
    rows = []
    for j, eta in enumerate(etas):
        a, b = qa(eta), qb(eta)
        rows.append((j, a, b, efficiency(a, b, exp.model.q)))
    with Path(args.output).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "Q_a", "Q_b", "efficiency"])
        for j, a, b, e in rows:
            w.writerow([j, io.fmt(a), io.fmt(b), io.fmt(e)])
    effs = np.array([r[3] for r in rows])
    print(f"{len(effs)} samples: median efficiency {np.median(effs):.4f}, "
          f"share above 1 = {np.mean(effs > 1):.3f}")


def cmd_sample(args, exp):
    freq = io.read_frequency(args.freq, exp.cands)
    n = args.n if args.n is not None else exp.search.n
    seed = args.seed if args.seed is not None else exp.search.seed
    eta = _single_eta(args, exp) if (args.eta is not None or exp.eta_prior is not None) else None
    design = sample_discrete(freq, n, seed, eta, exp.criterion if eta is not None else None)
    io.write_design(args.output, design)
    print(f"sampled {design.n} runs on {design.m} distinct points")


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qqdesign",
        description="Bayesian D-optimal designs for one continuous and one binary response.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help, output=True):
        s = sub.add_parser(name, help=help)
        s.add_argument("-c", "--config", required=True, help="experiment config (JSON)")
        s.add_argument("--seed", type=int, default=None, help="override search.seed")
        s.add_argument("--threads", type=int, default=1, help="worker processes")
        if output:
            s.add_argument("-o", "--output", required=True)
        s.set_defaults(func=func)
        return s

    add("candidates", cmd_candidates, "full factorial candidates with their model rows")

    s = add("bounds", cmd_bounds, "replication and run-size bounds as JSON", output=False)
    s.add_argument("--eta", help="eta CSV (first row used)")
    s.add_argument("--kappa", type=float, default=0.5)
    s.add_argument("--design", help="design CSV; bounds cover its distinct points")
    s.add_argument("-o", "--output", default="-", help="JSON path (default stdout)")

    s = add("local", cmd_local, "locally optimal design for one eta")
    s.add_argument("--eta", help="eta CSV (first row used)")
    s.add_argument("-n", type=int, default=None, help="run size (default search.n)")
    s.add_argument("--restarts", type=int, default=None)
    s.add_argument("--report", help="JSON report path")

    s = add("global", cmd_global, "global design frequencies over sampled eta")
    s.add_argument("--eta-samples", help="eta CSV; default samples the configured prior")
    s.add_argument("--B", type=int, default=None, help="number of eta samples")
    s.add_argument("-n", type=int, default=None)
    s.add_argument("--restarts", type=int, default=None)
    s.add_argument("--eta-out", help="write the eta samples used to this CSV")
    s.add_argument("--report", help="JSON report path")

    s = add("baselines", cmd_baselines, "linear, logistic and combined comparison designs")
    s.add_argument("--eta", help="eta CSV (first row used)")
    s.add_argument("-n", type=int, default=None)
    s.add_argument("--restarts", type=int, default=None)

    s = add("efficiency", cmd_efficiency, "per-eta efficiency of design a relative to b")
    s.add_argument("--design-a", required=True, help="design or frequency CSV")
    s.add_argument("--design-b", required=True, help="design or frequency CSV")
    s.add_argument("--eta-samples", help="eta CSV")
    s.add_argument("--eta", help="eta CSV (all rows used)")
    s.add_argument("--B", type=int, default=None)
    s.add_argument("-n", type=int, default=None, help="run size for frequency designs")

    s = add("sample", cmd_sample, "draw an exact design from a frequency design")
    s.add_argument("--freq", required=True)
    s.add_argument("-n", type=int, default=None)
    s.add_argument("--eta", help="eta CSV used to reject singular draws")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        exp = io.load_config(args.config)
        args.func(args, exp)
    except io.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot write {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularDesign, InfeasibleModel, SamplingFailed) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
