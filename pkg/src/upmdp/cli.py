"""Command-line front end.

Commands::

    upmdp bound      pure bound calculator (eta, beta or N) and k-sweep tables
    upmdp verify     sample -> instantiate -> model check -> bound, for a fixed threshold
    upmdp threshold  sample-dependent threshold experiments (all samples satisfy)
    upmdp uav-gen    write a UAV grid-world model and its parameter distribution
    upmdp example    write the eight-state example pMC and its distribution

Exit codes: 0 success, 2 input or validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bench, scenario
from .mc import DEFAULT_TOL, BatchChecker, ConvergenceError, InfiniteReward
from .pmdp import (InstantiationError, ModelError, Specification, instantiate_many, load_model,
                   parse_spec, save_model)
from .sampling import SampleError, SampleSet, draw, load_distribution, load_samples, save_distribution

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
DEFAULT_BETAS = (0.9, 0.99, 0.999, 0.9999)
REPORT_COLUMNS = ["beta", "lower_sat", "lower_unsat", "n", "n_violating", "seed"]


class InputError(Exception):
    pass


# -- shared helpers ---------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _betas(args) -> list[float]:
    betas = sorted(set(args.beta or DEFAULT_BETAS))
    for b in betas:
        if not 0.0 < b < 1.0:
            raise InputError(f"--beta must lie in (0, 1), got {b}")
    return betas


def _samples(args, model, seed: int) -> SampleSet:
    if args.samples_file:
        return load_samples(args.samples_file, model.parameters)
    if not args.dist:
        raise InputError("give --dist or --samples-file")
    if args.n is None or args.n < 1:
        raise InputError("--n must be a positive integer")
    dist = load_distribution(args.dist)
    return draw(dist, model.parameters, args.n, seed, base=Path(args.dist).parent)


def _solve(model, spec: Specification, samples: SampleSet, workers: int, tol: float) -> np.ndarray:
    """Checked value at the initial state for every sample, in sample order."""
    probs = instantiate_many(model, samples.values)
    checker = BatchChecker.for_spec(model, spec, tol)
    try:
        return checker.solve(probs, workers=workers)
    except InfiniteReward:
        # the target is missed with positive probability for every valuation
        return np.full(len(samples), np.inf)


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- bound ----------------------------------------------------------------------

def cmd_bound(args) -> int:
    if args.table:
        if args.n is None or not args.beta or len(args.beta) != 1:
            raise InputError("--table needs --n and exactly one --beta")
        buf = io.StringIO()
        scenario.write_table(args.n, args.beta[0], buf)
        _write(args.csv or "-", buf.getvalue())
        return EXIT_OK

    given = {k for k in ("n", "eta", "beta") if getattr(args, k) is not None}
    rows = []
    if given == {"n", "beta"}:
        for b in _betas(args):
            if args.violating is None:
                rows.append({"n": args.n, "beta": b, "eta": scenario.eta_thm1(args.n, b)})
            else:
                lo, lu = scenario.bound_pair(args.n, args.violating, b)
                rows.append({"n": args.n, "violating": args.violating, "beta": b,
                             "eta": lo, "eta_unsat": lu})
    elif given == {"n", "eta"}:
        if args.violating is None:
            beta = scenario.beta_thm1(args.n, args.eta)
        else:
            beta = scenario.beta_from_bound(args.n, args.violating, args.eta)
        rows.append({"n": args.n, "violating": args.violating, "eta": args.eta, "beta": beta})
    elif given == {"eta", "beta"}:
        if args.violating is not None or len(args.beta) != 1:
            raise InputError("N from (eta, beta) takes one --beta and no --violating")
        rows.append({"eta": args.eta, "beta": args.beta[0],
                     "n": scenario.n_required(args.eta, args.beta[0])})
    else:
        raise InputError("give exactly two of --n, --eta, --beta "
                         "(eta from N and beta, beta from N and eta, or N from eta and beta)")

    if args.json:
        _write(args.json, json.dumps(rows, indent=1) + "\n")
    for r in rows:
        print("  ".join(f"{k}={v if isinstance(v, int) or v is None else f'{v:.6g}'}"
                        for k, v in r.items() if v is not None))
    return EXIT_OK


# -- verify ---------------------------------------------------------------------

@dataclass
class VerifyReport:
    model: str
    spec: str
    dist: str | None
    n: int
    seed: int | None
    n_sat: int
    n_violating: int
    n_ties: int
    bounds: list = field(default_factory=list)  # (beta, lower_sat, lower_unsat)
    seconds: float = 0.0
    per_sample: list | None = None

    @property
    def fraction(self) -> float:
        return self.n_sat / self.n

    def to_dict(self) -> dict:
        d = {"model": self.model, "spec": self.spec, "dist": self.dist, "n": self.n,
             "seed": self.seed, "n_sat": self.n_sat, "n_violating": self.n_violating,
             "n_ties": self.n_ties, "fraction": self.fraction, "seconds": self.seconds,
             "bounds": [{"beta": b, "lower_sat": ls, "lower_unsat": lu} for b, ls, lu in self.bounds]}
        if self.per_sample is not None:
            d["per_sample"] = self.per_sample
        return d


def run_verify(model, spec: Specification, samples: SampleSet, betas, workers=1,
               tol=DEFAULT_TOL, per_sample=False, dist_name=None) -> VerifyReport:
    t0 = time.perf_counter()
    values = _solve(model, spec, samples, workers, tol)
    sat = spec.holds_many(values)
    ties = np.abs(values - spec.threshold) <= tol
    n = len(samples)
    n_viol = int(n - sat.sum())
    bounds = [(b, *scenario.bound_pair(n, n_viol, b)) for b in betas]
    rep = VerifyReport(model.name, str(spec), dist_name, n, samples.seed, int(sat.sum()), n_viol,
                       int(ties.sum()), bounds, time.perf_counter() - t0)
    if per_sample:
        rep.per_sample = [{"index": i, "valuation": samples[i], "value": float(values[i]),
                           "satisfied": bool(sat[i]), "tie": bool(ties[i])} for i in range(n)]
    return rep


def _report_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for rep in reports:
        for b, ls, lu in rep.bounds:
            w.writerow([_fmt(b), _fmt(ls), _fmt(lu), rep.n, rep.n_violating,
                        "" if rep.seed is None else rep.seed])
    return buf.getvalue()


def _per_sample_csv(rep: VerifyReport, params) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", *params, "value", "satisfied", "tie"])
    for r in rep.per_sample:
        w.writerow([r["index"], *(_fmt(r["valuation"][p]) for p in params), _fmt(r["value"]),
                    int(r["satisfied"]), int(r["tie"])])
    return buf.getvalue()


def cmd_verify(args) -> int:
    model = load_model(args.model)
    spec = parse_spec(args.spec)
    betas = _betas(args)
    if args.repeats < 1:
        raise InputError("--repeats must be at least 1")
    if args.samples_file and args.repeats > 1:
        raise InputError("--repeats needs fresh draws; it cannot be combined with --samples-file")
    reports = []
    for r in range(args.repeats):
        samples = _samples(args, model, args.seed + r)
        reports.append(run_verify(model, spec, samples, betas, args.workers, args.tol,
                                  bool(args.per_sample), args.dist))

    print(f"model {model.name}  spec {spec}  n {reports[0].n}  repeats {len(reports)}")
    for rep in reports:
        if len(reports) > 1 or rep.seed is not None:
            print(f"seed {rep.seed}: ", end="")
        print(f"satisfied {rep.n_sat}  violating {rep.n_violating}  "
              f"fraction {rep.fraction:.4f}  ({rep.seconds:.2f} s)")
        if rep.n_ties:
            print(f"warning: {rep.n_ties} value(s) within {args.tol:g} of the threshold; "
                  f"decided by the raw comparison", file=sys.stderr)
    print(f"{'beta':>8}  {'lower_sat':>10}  {'lower_unsat':>11}")
    for i, b in enumerate(betas):
        ls = float(np.mean([rep.bounds[i][1] for rep in reports]))
        lu = float(np.mean([rep.bounds[i][2] for rep in reports]))
        print(f"{b:>8g}  {ls:>10.6f}  {lu:>11.6f}")

    if args.csv:
        _write(args.csv, _report_csv(reports))
    if args.json:
        doc = [rep.to_dict() for rep in reports]
        _write(args.json, json.dumps(doc if len(doc) > 1 else doc[0], indent=1) + "\n")
    if args.per_sample:
        _write(args.per_sample, "".join(_per_sample_csv(rep, model.parameters) for rep in reports))
    return EXIT_OK


# -- threshold ------------------------------------------------------------------

_MEASURE = re.compile(r"^\s*(?P<m>[PE])(?P<d>max|min)?\s*(?P<op><=|>=|<|>)?\s*"
                      r"(?:step\s*=\s*(?P<k>\d+))?\s*$")


def parse_measure(text: str) -> Specification:
    """``P``, ``Pmax <=``, ``Emin >=``, ``P <= step=3``: a specification without a threshold."""
    m = _MEASURE.match(text)
    if not m:
        raise InputError(f"cannot parse measure {text!r}")
    k = int(m["k"]) if m["k"] is not None else None
    measure = "reward" if m["m"] == "E" else ("bounded" if k is not None else "reach")
    return Specification(measure, m["d"], m["op"] or "<=", 0.0, k)


def lambda_star(values: np.ndarray, spec: Specification) -> float:
    """Tightest threshold met by every sample: max for upper bounds, min for lower bounds."""
    return float(values.max() if spec.is_upper else values.min())


def cmd_threshold(args) -> int:
    model = load_model(args.model)
    spec = parse_measure(args.measure)
    betas = _betas(args)
    if args.repeats < 1:
        raise InputError("--repeats must be at least 1")
    if args.samples_file and args.repeats > 1:
        raise InputError("--repeats needs fresh draws; it cannot be combined with --samples-file")
    stars, seeds = [], []
    for r in range(args.repeats):
        samples = _samples(args, model, args.seed + r)
        stars.append(lambda_star(_solve(model, spec, samples, args.workers, args.tol), spec))
        seeds.append(samples.seed)
    n = len(samples)
    stars = np.array(stars)
    op = "<=" if spec.is_upper else ">="
    print(f"model {model.name}  measure {args.measure.strip()}  n {n}  repeats {len(stars)}")
    if len(stars) == 1:
        print(f"lambda* = {stars[0]!r}  (spec {op} lambda* holds for every sample)")
    else:
        print(f"lambda* mean {stars.mean():.6g}  std {stars.std(ddof=1):.6g}  "
              f"min {stars.min():.6g}  max {stars.max():.6g}")
    print(f"{'beta':>8}  {'eta':>10}")
    etas = [(b, scenario.eta_thm1(n, b)) for b in betas]
    for b, eta in etas:
        print(f"{b:>8g}  {eta:>10.6f}")
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["repeat", "seed", "n", "lambda_star"])
        for r, (sd, s) in enumerate(zip(seeds, stars)):
            w.writerow([r, "" if sd is None else sd, n, _fmt(s)])
        _write(args.csv, buf.getvalue())
    if args.json:
        doc = {"model": model.name, "measure": args.measure.strip(), "n": n,
               "lambda_star": [float(s) for s in stars], "mean": float(stars.mean()),
               "std": float(stars.std(ddof=1)) if len(stars) > 1 else 0.0,
               "eta": [{"beta": b, "eta": e} for b, e in etas]}
        _write(args.json, json.dumps(doc, indent=1) + "\n")
    return EXIT_OK


# -- generators -----------------------------------------------------------------

def _cell(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise InputError(f"cell must be x,y,z, got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise InputError(f"cell must be x,y,z integers, got {text!r}") from None


def _cells(items) -> frozenset:
    return frozenset(_cell(c) for item in items for c in item.split(";") if c.strip())


def _sibling_dist(out: Path) -> Path:
    return out.with_name(out.stem + ".dist.json")


def cmd_uav_gen(args) -> int:
    kw = {"weather_preset": args.preset}
    if args.grid:
        try:
            kw["grid"] = tuple(int(v) for v in args.grid.lower().split("x"))
        except ValueError:
            raise InputError(f"--grid must look like 6x6x3, got {args.grid!r}") from None
        if len(kw["grid"]) != 3:
            raise InputError(f"--grid must look like 6x6x3, got {args.grid!r}")
        # the default layout only fits the default grid
        kw["obstacles"] = frozenset()
    # three zones by default, fewer on grids narrower than three cells
    kw["zones"] = args.zones if args.zones is not None else min(3, kw.get("grid", (6,))[0])
    if args.obstacle is not None:
        kw["obstacles"] = _cells(args.obstacle)
    if args.target is not None:
        kw["target"] = _cells(args.target)
    elif args.grid:
        raise InputError("--target is required with a custom --grid")
    if args.start:
        kw["start"] = _cell(args.start)
    if args.param_range:
        try:
            lo, hi = (float(v) for v in args.param_range.split(","))
        except ValueError:
            raise InputError("--param-range must look like 0.05,0.95") from None
        kw["param_range"] = (lo, hi)
    try:
        cfg = bench.UavConfig(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    model, dist = bench.gen_uav(cfg)
    out = Path(args.out)
    save_model(model, out)
    save_distribution(dist, _sibling_dist(out))
    print(f"wrote {out} and {_sibling_dist(out)}")
    print(f"states {model.n_states}  choices {model.n_choices}  transitions {model.n_edges}  "
          f"parameters {len(model.parameters)}")
    return EXIT_OK


def cmd_example(args) -> int:
    out = Path(args.out)
    save_model(bench.example_pmc(), out)
    save_distribution(bench.example_distribution(), _sibling_dist(out))
    print(f"wrote {out} and {_sibling_dist(out)}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="upmdp", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add_beta(sp):
        sp.add_argument("--beta", type=float, action="append",
                        help="confidence probability (repeatable)")

    def add_run(sp):
        sp.add_argument("--model", required=True, help="model JSON file")
        sp.add_argument("--dist", help="distribution JSON file")
        sp.add_argument("--samples-file", help="CSV of externally generated samples")
        sp.add_argument("--n", type=int, help="number of samples")
        sp.add_argument("--seed", type=int, default=0)
        add_beta(sp)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--repeats", type=int, default=1,
                        help="independent reruns with seeds seed, seed+1, ...")
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL, help="model-checking tolerance")
        sp.add_argument("--csv", help="CSV output path ('-' for stdout)")
        sp.add_argument("--json", help="JSON output path ('-' for stdout)")

    b = sub.add_parser("bound", help="scenario bound calculator")
    b.add_argument("--n", type=int)
    b.add_argument("--violating", type=int,
                   help="violating samples (fixed threshold); omit for a sample-dependent threshold")
    b.add_argument("--eta", type=float)
    add_beta(b)
    b.add_argument("--table", action="store_true", help="t* for every k at (N, beta) as CSV")
    b.add_argument("--csv")
    b.add_argument("--json")
    b.set_defaults(func=cmd_bound)

    v = sub.add_parser("verify", help="bound the satisfaction probability of a specification")
    add_run(v)
    v.add_argument("--spec", required=True, help="e.g. 'Pmax >= 0.9', 'P <= 0.13 step=3', 'Emin <= 3'")
    v.add_argument("--per-sample", help="CSV path for per-sample values and tie flags")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("threshold", help="sample-dependent threshold experiment")
    add_run(t)
    t.add_argument("--measure", "--spec", dest="measure", default="P <=",
                   help="measure and operator without threshold, e.g. 'Pmax <=' or 'Emin >='")
    t.set_defaults(func=cmd_threshold)

    u = sub.add_parser("uav-gen", help="generate a UAV grid-world model")
    u.add_argument("--grid", help="NXxNYxNZ, e.g. 6x6x3")
    u.add_argument("--zones", type=int, help="x-axis wind zones (default 3, capped at nx)")
    u.add_argument("--target", action="append", help="target cell x,y,z (repeatable or ';'-separated)")
    u.add_argument("--obstacle", action="append", help="obstacle cell x,y,z (repeatable or ';'-separated)")
    u.add_argument("--start", help="start cell x,y,z")
    u.add_argument("--preset", choices=sorted(bench.PRESETS), default="uniform")
    u.add_argument("--param-range", help="lo,hi for every push probability")
    u.add_argument("--out", required=True, help="model JSON path; the distribution goes next to it")
    u.set_defaults(func=cmd_uav_gen)

    e = sub.add_parser("example", help="write the eight-state example pMC")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_example)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InstantiationError as exc:
        where = "" if exc.sample_index is None else f" (sample {exc.sample_index}: {exc.valuation})"
        print(f"error: {exc}{where}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ModelError, SampleError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
