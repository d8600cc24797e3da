"""Command-line interface: ``python3 -m splitexpm {compute,bench,order,catalog}``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench
from .errmodel import SelectionPlan, pade_plan, plan_for_scheme, run_plan, select_method
from .errors import (
    DimensionMismatchError,
    IllConditionedFitError,
    NoFeasibleScalingError,
    SingularMatrixError,
    UnknownSchemeError,
    UnknownToleranceError,
)
from .matrixcore import CostTally, one_norm
from .padetaylor import PADE_KERNELS, THETA_TABLE, canonical_tolerance, pade_cost, scaling_for
from .splitcat import UNVERIFIED, catalog, describe, get_scheme, scheme_cost

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

CONFIG_ERRORS = (ValueError, KeyError, UnknownSchemeError, UnknownToleranceError,
                 DimensionMismatchError, FileNotFoundError)
NUMERIC_ERRORS = (SingularMatrixError, NoFeasibleScalingError, IllConditionedFitError,
                  FloatingPointError, ArithmeticError)


class NumericalFailure(ArithmeticError):
    pass


def _inner(text):
    return "exact" if text == "exact" else int(text)


def _float_list(text):
    return tuple(float(v) for v in text.split(",") if v)


def _s_range(text):
    lo, _, hi = text.partition(":")
    return tuple(range(int(lo), int(hi) + 1)) if hi else (int(lo),)


def load_problem(spec: str, eps: float | None):
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in bench.BUILTINS:
            raise ValueError(f"unknown builtin {name!r}; choose from {sorted(bench.BUILTINS)}")
        return bench.BUILTINS[name](1e-3 if eps is None else eps)
    return bench.read_matrix_file(spec, eps)


def make_plan(P, method: str, u: float, inner, squarings: int | None) -> SelectionPlan:
    if method == "auto":
        return select_method(P, u, inner=inner)
    if method == "pade":
        return pade_plan(P, u)
    if method.startswith("r") and method[1:].isdigit() and int(method[1:]) // 2 in PADE_KERNELS:
        m = int(method[1:]) // 2
        s = scaling_for(one_norm(P.dense()), THETA_TABLE.theta(u, m)) if squarings is None else squarings
        return SelectionPlan(method, s, float("nan"), pade_cost(m) + s, u, m=m)
    scheme = get_scheme(method)
    if squarings is not None:
        return SelectionPlan(method, squarings, float("nan"), scheme_cost(scheme, squarings, inner),
                             u, inner)
    return plan_for_scheme(P, method, u, inner)


def cmd_compute(args) -> int:
    u = canonical_tolerance(args.tol)
    P = load_problem(args.matrix, args.eps)
    plan = make_plan(P, args.method, u, args.inner, args.squarings)
    print(f"# method={plan.method} s={plan.s} predicted_cost={plan.predicted_cost} "
          f"predicted_error={plan.predicted_error:.3e} tol={u:g}")
    tally = CostTally()
    Y = run_plan(P, plan, tally)
    if not np.all(np.isfinite(Y)):
        raise NumericalFailure("result contains non-finite entries")
    print(f"measured_cost {tally.dense_products}")
    if args.check:
        ref = bench.reference_expm(P.dense())
        print(f"relative_error {bench.relative_error(Y, ref):.3e}")
    if args.out:
        np.save(args.out, Y)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = bench.ExperimentConfig(args.experiment, args.eps or (), args.tol,
                                 tuple(args.schemes.split(",")) if args.schemes else ("auto",),
                                 args.s_range or (), args.out, args.seed, args.inner)
    records = bench.run_experiment(cfg)
    failed = sum(1 for r in records if not np.isfinite(r.error))
    print(f"{len(records)} rows ({failed} failed) -> {args.out}")
    for name, ok, detail in bench.qualitative_checks(records, cfg.u):
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK


def cmd_order(args) -> int:
    est = bench.empirical_order(args.scheme, seed=args.seed, inner=args.inner)
    status = "verified" if est.matches() else "unverified"
    print(f"{est.scheme}: p1={est.p1:.2f} p2={est.p2:.2f} declared={est.declared} {status}")
    if est.scheme in UNVERIFIED:
        print(f"  note: {UNVERIFIED[est.scheme]}")
    return EXIT_OK


def cmd_catalog(args) -> int:
    rows = [describe(s) for s in catalog(include_experimental=not args.no_experimental)]
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    print(f"{'id':14s} {'family':12s} {'order':10s} {'cost':>6s}  real  notes")
    for r in rows:
        notes = []
        if r["experimental"]:
            notes.append("experimental")
        if not r["verified"]:
            notes.append("unverified")
        order = "(" + ",".join(map(str, r["order"])) + ")"
        print(f"{r['id']:14s} {r['family']:12s} {order:10s} {r['cost']:>6s}  "
              f"{'yes' if r['real'] else 'no ':4s}  {', '.join(notes)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splitexpm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compute", help="exponentiate one matrix with a planned method")
    c.add_argument("--matrix", required=True, help="matrix file or builtin:NAME")
    c.add_argument("--eps", type=float, default=None, help="size of the perturbation")
    c.add_argument("--tol", type=float, default=1e-6, help="tolerance u (a theta-table row)")
    c.add_argument("--method", default="auto", help="auto, pade, r2/r4/r10/r26 or a catalog id")
    c.add_argument("--squarings", type=int, default=None, help="override the planned squarings")
    c.add_argument("--inner", type=_inner, default=2, help="inner Pade order: 2, 4 or exact")
    c.add_argument("--check", action="store_true", help="report the error against the oracle")
    c.add_argument("--out", default=None, help="save the result as .npy")
    c.set_defaults(func=cmd_compute)

    b = sub.add_parser("bench", help="run an experiment sweep and write CSV")
    b.add_argument("--experiment", required=True, choices=bench.EXPERIMENTS)
    b.add_argument("--out", required=True)
    b.add_argument("--eps", type=_float_list, default=None, help="comma-separated eps values")
    b.add_argument("--tol", type=float, default=1e-6)
    b.add_argument("--schemes", default=None, help="comma-separated scheme ids (default: auto)")
    b.add_argument("--s-range", type=_s_range, default=None, help="LO:HI squarings")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--inner", type=_inner, default=2)
    b.set_defaults(func=cmd_bench)

    o = sub.add_parser("order", help="measure (p1, p2) of a catalog scheme")
    o.add_argument("--scheme", required=True)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--inner", type=_inner, default="exact")
    o.set_defaults(func=cmd_order)

    k = sub.add_parser("catalog", help="list the scheme catalog")
    k.add_argument("--json", action="store_true")
    k.add_argument("--no-experimental", action="store_true")
    k.set_defaults(func=cmd_catalog)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with np.errstate(over="raise", invalid="raise"):
            return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
