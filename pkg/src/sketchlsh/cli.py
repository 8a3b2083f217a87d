"""Command-line entry point: ``sketchlsh {bench,validate,scaling,info}``.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import os
import platform
import sys
import time

import numpy as np

from . import __version__, _kernels
from .dataio import (
    DataFormatError,
    ResultsRow,
    load_dataset,
    normalize_rows,
    split_queries,
    synth_gaussian,
    write_results,
    write_rows,
)
from .evaluation import (
    estimate_collision,
    ground_truth,
    pair_at_angle,
    pair_at_distance,
    param_count,
    run_recall_experiment,
    sketch_diagnostics,
    time_hash,
)
from .families import COSINE_KINDS, EUCLIDEAN_KINDS, SchemeKind, make_family
from .hashcore import derive_seed, rng_for
from .sketch import factor_modes, tensorize
from .theory import sensitivity

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3

COSINE_ANGLES = (math.pi / 6, math.pi / 3, math.pi / 2)
EUCLIDEAN_DISTANCES = (0.5, 1.0, 2.0, 4.0)
COSINE_TOL = 0.015
EUCLIDEAN_TOL = 0.02
PRODUCT_TOL = 0.02
VARIANCE_TOL = 0.05
CORRELATION_TOL = 0.05


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# flag parsing helpers
# --------------------------------------------------------------------------


def parse_range(text: str) -> list[int]:
    """``"1..20"`` (inclusive), ``"1,2,5"``, or a single integer."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if lo < 1 or hi < lo:
                raise UsageError(f"bad range {text!r}")
            return list(range(lo, hi + 1))
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None
    if not values or min(values) < 1:
        raise UsageError(f"bad integer list {text!r}")
    return values


def parse_schemes(text: str) -> list[SchemeKind]:
    if text.strip().lower() == "all":
        return list(SchemeKind)
    try:
        return [SchemeKind.parse(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_synth(text: str) -> tuple[int, int]:
    try:
        fields = dict(part.split("=", 1) for part in text.split(","))
        n, d = int(fields["n"]), int(fields["d"])
    except (ValueError, KeyError):
        raise UsageError(f"--synth expects n=<int>,d=<int>, got {text!r}") from None
    if n < 2 or d < 1:
        raise UsageError("--synth needs n >= 2 and d >= 1")
    return n, d


def _positive_width(w: float) -> float:
    if not w > 0 or not math.isfinite(w):
        raise UsageError(f"--w must be a positive number, got {w}")
    return w


def _hcs_modes(kinds, d: int, m: int, order: int) -> dict:
    if not any(k.projection == "hcs" for k in kinds):
        return {}
    mode_d, padded = tensorize(d, order)
    return {"mode_d": list(mode_d), "padded_d": padded, "mode_m": list(factor_modes(m, order))}


def base_manifest(command: str, args: argparse.Namespace) -> dict:
    flags = {
        k: (v if isinstance(v, (int, float, str, bool, type(None))) else str(v))
        for k, v in sorted(vars(args).items())
        if k != "func"
    }
    return {
        "command": command,
        "flags": flags,
        "sketchlsh": __version__,
        "numpy": np.__version__,
        "backend": _kernels.BACKEND,
        "python": platform.python_version(),
    }


def _threads_from_env() -> contextlib.AbstractContextManager:
    value = os.environ.get("SKETCHLSH_THREADS")
    if not value:
        return contextlib.nullcontext()
    try:
        threads = int(value)
    except ValueError:
        raise UsageError(f"SKETCHLSH_THREADS must be an integer, got {value!r}") from None
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return contextlib.nullcontext()
    return threadpool_limits(limits=threads)


# --------------------------------------------------------------------------
# bench
# --------------------------------------------------------------------------


def cmd_bench(args) -> int:
    kinds = parse_schemes(args.schemes)
    _positive_width(args.w)
    if args.m < 1 or args.k < 1 or args.reps < 1 or args.order < 1:
        raise UsageError("--m, --k, --reps and --order must be >= 1")
    if args.metric is not None:
        wrong = [k.value for k in kinds if k.metric != args.metric]
        if wrong:
            raise UsageError(f"schemes {', '.join(wrong)} do not use the {args.metric} metric")
    L_values = parse_range(args.L) if args.L else list(range(1, 51))
    if (args.synth is None) == (args.data is None):
        raise UsageError("give exactly one of --synth or --data")

    if args.synth is not None:
        n, d = parse_synth(args.synth)
        dataset = synth_gaussian(n, d, derive_seed(args.seed, "data"))
    else:
        dataset = load_dataset(args.data)
    points = normalize_rows(dataset.points) if args.normalize else dataset.points
    train, queries = split_queries(points, args.queries, mode=args.split, seed=args.seed)

    manifest = base_manifest("bench", args)
    manifest.update(
        dataset=dataset.source,
        n_train=int(train.shape[0]),
        n_queries=int(queries.shape[0]),
        d=dataset.d,
        L_values=[L_values[0], L_values[-1]] if L_values == list(range(L_values[0], L_values[-1] + 1)) else L_values,
        **_hcs_modes(kinds, dataset.d, args.m, args.order),
    )

    rows: list[ResultsRow] = []
    truth = {}
    for kind in kinds:
        if kind.metric not in truth:
            truth[kind.metric] = ground_truth(train, queries, args.k, kind.metric)
        stored = param_count(
            make_family(kind, dataset.d, args.m, args.seed, w=args.w, order=args.order)
        ).stored_values
        curve = run_recall_experiment(
            train,
            queries,
            kind,
            L_values=L_values,
            k=args.k,
            m=args.m,
            repetitions=args.reps,
            seed=args.seed,
            w=args.w,
            order=args.order,
            auto_stop=0.99 if args.auto_stop else None,
            truth=truth[kind.metric],
        )
        for cell in curve.cells:
            rows.append(
                ResultsRow(
                    scheme=kind.value,
                    m=args.m,
                    L=cell.L,
                    k=args.k,
                    seed=cell.seed,
                    mean_recall=cell.mean_recall,
                    total_query_time_ms=cell.total_query_time * 1e3,
                    build_time_ms=cell.build_time * 1e3,
                    stored_values=stored,
                    d=dataset.d,
                    n=int(train.shape[0]),
                    hash_time_ms=cell.hash_time * 1e3,
                    rank_time_ms=cell.rank_time * 1e3,
                    order=args.order if kind.projection == "hcs" else 0,
                )
            )
        for pt in curve.points:
            print(
                f"{kind.value:10s} L={pt.L:3d} recall={pt.mean_recall:.4f} "
                f"query_time={pt.total_query_time * 1e3:.2f}ms candidates={pt.mean_candidates:.1f}"
            )
    if args.out:
        write_results(rows, args.out, args.format, manifest=manifest)
        print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# validate
# --------------------------------------------------------------------------


def validation_report(
    kinds,
    *,
    d: int,
    trials: int,
    seed: int,
    w: float,
    order: int,
    plans: int,
    sketch_m: int,
    product_m: int,
    diagnostics: bool = True,
    self_trials: int = 200,
) -> list[dict]:
    """Run the collision-law, product-law, self-collision, and sketch checks.

    Each row records the observation, the reference value, the tolerance and
    the 3-sigma binomial bound at the trial count.
    """
    rows = []

    def add(check, scheme, geometry, empirical, theory, tol, bound):
        err = abs(empirical - theory)
        rows.append(
            {
                "check": check,
                "scheme": scheme,
                "geometry": geometry,
                "empirical": empirical,
                "theory": theory,
                "abs_error": err,
                "tolerance": tol,
                "three_sigma": bound,
                "passed": bool(err <= tol),
            }
        )

    for kind in kinds:
        if kind.metric == "cosine":
            geoms = [(f"theta={t:.6f}", pair_at_angle(d, t, derive_seed(seed, f"pair/{t}"))) for t in COSINE_ANGLES]
            tol = COSINE_TOL
        else:
            geoms = [(f"R={R:g}", pair_at_distance(d, R, derive_seed(seed, f"pair/{R}"))) for R in EUCLIDEAN_DISTANCES]
            tol = EUCLIDEAN_TOL
        for label, (u, v) in geoms:
            est = estimate_collision(kind, u, v, trials, derive_seed(seed, f"collide/{kind.value}/{label}"), w=w, order=order)
            add("collision", kind.value, label, est.empirical, est.theoretical, tol, est.bound)
        u = geoms[0][1][0]
        est = estimate_collision(kind, u, u, self_trials, derive_seed(seed, f"self/{kind.value}"), w=w, order=order)
        add("self", kind.value, "u=v", est.empirical, 1.0, 0.0, 0.0)

    for kind in (SchemeKind.CS_SRP, SchemeKind.CS_E2LSH):
        if kind not in kinds:
            continue
        if kind.metric == "cosine":
            label, (u, v) = "theta=1.047198", pair_at_angle(d, math.pi / 3, derive_seed(seed, "product/pair"))
        else:
            label, (u, v) = "R=1", pair_at_distance(d, 1.0, derive_seed(seed, "product/pair"))
        est = estimate_collision(kind, u, v, trials, derive_seed(seed, f"product/{kind.value}"), m=product_m, w=w, order=order)
        predicted = est.coordinate_rate**product_m
        bound = 3.0 * math.sqrt(predicted * (1 - predicted) / trials)
        add("product", kind.value, f"{label},m={product_m}", est.empirical, predicted, PRODUCT_TOL, bound)

    if diagnostics:
        p = rng_for(derive_seed(seed, "diag/p")).standard_normal(d)
        for plan_kind in ("cs", "hcs"):
            diag = sketch_diagnostics(plan_kind, p, sketch_m, plans, derive_seed(seed, f"diag/{plan_kind}"), order=order)
            worst = int(np.argmax(np.abs(diag.variances / diag.expected_variance - 1.0)))
            add(
                "variance",
                plan_kind,
                f"m={sketch_m},coord={worst}",
                float(diag.variances[worst]) / diag.expected_variance,
                1.0,
                VARIANCE_TOL,
                3.0 * math.sqrt(2.0 / (plans - 1)),
            )
            add(
                "correlation",
                plan_kind,
                f"m={sketch_m}",
                diag.max_abs_correlation,
                0.0,
                CORRELATION_TOL,
                3.0 / math.sqrt(plans),
            )
    return rows


def cmd_validate(args) -> int:
    kinds = parse_schemes(args.schemes)
    _positive_width(args.w)
    if args.trials < 1 or args.d < 2 or args.plans < 100:
        raise UsageError("need --trials >= 1, --d >= 2 and --plans >= 100")
    t0 = time.perf_counter()
    rows = validation_report(
        kinds,
        d=args.d,
        trials=args.trials,
        seed=args.seed,
        w=args.w,
        order=args.order,
        plans=args.plans,
        sketch_m=args.sketch_m,
        product_m=args.product_m,
        diagnostics=not args.skip_diagnostics,
    )
    print(f"{'check':11s} {'scheme':10s} {'geometry':22s} {'empirical':>10s} {'theory':>10s} {'|err|':>8s} {'tol':>6s} {'3sigma':>7s}")
    for r in rows:
        print(
            f"{r['check']:11s} {r['scheme']:10s} {r['geometry']:22s} {r['empirical']:10.5f} "
            f"{r['theory']:10.5f} {r['abs_error']:8.5f} {r['tolerance']:6.3f} {r['three_sigma']:7.4f} "
            f"{'PASS' if r['passed'] else 'FAIL'}"
        )
    failed = sum(not r["passed"] for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed in {time.perf_counter() - t0:.1f}s")
    if args.out:
        write_rows(rows, args.out, args.format, manifest=base_manifest("validate", args))
    return EXIT_VALIDATION if failed else EXIT_OK


# --------------------------------------------------------------------------
# scaling
# --------------------------------------------------------------------------


def scaling_rows(kinds, d: int, m_values, orders, reps: int, seed: int, w: float, timing: bool = True) -> list[dict]:
    rows = []
    for kind in kinds:
        for order in orders if kind.projection == "hcs" else [0]:
            for m in m_values:
                fam = make_family(kind, d, m, seed, w=w, order=max(order, 1))
                pc = param_count(fam)
                t = time_hash(kind, d, m, reps=reps, seed=seed, order=max(order, 1), w=w) if timing else float("nan")
                rows.append(
                    {
                        "scheme": kind.value,
                        "order": order,
                        "m": m,
                        "d": d,
                        "stored_values": pc.stored_values,
                        "formula_values": pc.formula_values,
                        "coefficient_values": pc.coefficient_values,
                        "time_per_hash_us": t * 1e6,
                    }
                )
    return rows


def cmd_scaling(args) -> int:
    kinds = parse_schemes(args.schemes)
    _positive_width(args.w)
    m_values = parse_range(args.m)
    orders = parse_range(args.orders)
    if args.reps < 10:
        raise UsageError("--reps must be >= 10")
    rows = scaling_rows(kinds, args.d, m_values, orders, args.reps, args.seed, args.w, timing=not args.no_timing)
    print(f"{'scheme':10s} {'N':>2s} {'m':>4s} {'stored':>9s} {'formula':>9s} {'coeffs':>7s} {'us/hash':>9s}")
    for r in rows:
        print(
            f"{r['scheme']:10s} {r['order']:2d} {r['m']:4d} {r['stored_values']:9d} "
            f"{r['formula_values']:9d} {r['coefficient_values']:7d} {r['time_per_hash_us']:9.1f}"
        )
    if args.out:
        write_rows(rows, args.out, args.format, manifest=base_manifest("scaling", args))
    return EXIT_OK


# --------------------------------------------------------------------------
# info
# --------------------------------------------------------------------------


def validity_warnings(kind: SchemeKind, d: int, m: int, order: int) -> list[str]:
    warnings = []
    if kind.projection == "cs" and m >= d ** (1.0 / 8.0):
        warnings.append(
            f"m={m} >= d^(1/8)={d ** 0.125:.2f}: coordinate normality/independence is asymptotic "
            "in m = o(d^c) and may be loose at this size"
        )
    if kind.projection == "hcs":
        exponent = (3 * order - 8) / (10 * order)
        lhs = math.sqrt(m) * order**0.8
        rhs = d**exponent
        if lhs >= rhs:
            warnings.append(
                f"sqrt(m) N^(4/5)={lhs:.2f} >= d^((3N-8)/(10N))={rhs:.3g}: the asymptotic "
                f"normality condition for order {order} is not met at this (d, m)"
            )
    return warnings


def cmd_info(args) -> int:
    kind = SchemeKind.parse(args.scheme)
    _positive_width(args.w)
    if args.d < 1 or args.m < 1 or args.order < 1:
        raise UsageError("--d, --m and --order must be >= 1")
    if kind.metric == "euclidean":
        R1 = 1.0 if args.R1 is None else args.R1
        R2 = 2.0 if args.R2 is None else args.R2
    else:
        R1 = math.pi / 6 if args.R1 is None else args.R1
        R2 = math.pi / 3 if args.R2 is None else args.R2
    try:
        sens = sensitivity(kind, R1, R2, args.m, w=args.w)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    manifest = base_manifest("info", args)
    manifest.update(_hcs_modes([kind], args.d, args.m, args.order))
    for key, value in manifest.items():
        print(f"{key}: {value}")
    unit = "distance" if kind.metric == "euclidean" else "angle"
    print(f"sensitivity ({unit}): R1={sens.R1:.6g} R2={sens.R2:.6g} P1={sens.P1:.6f} P2={sens.P2:.6f}")
    print(f"family (m={sens.m}): P1^m={sens.P1_family:.6g} P2^m={sens.P2_family:.6g}")
    pc = param_count(make_family(kind, args.d, args.m, 0, w=args.w, order=args.order))
    print(f"stored values: {pc.stored_values} (coefficients only: {pc.coefficient_values})")
    for warning in validity_warnings(kind, args.d, args.m, args.order):
        print(f"warning: {warning}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sketchlsh", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sketchlsh {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def output_flags(p):
        p.add_argument("--out", help="output file")
        p.add_argument("--format", choices=["csv", "jsonl"], default="csv")

    b = sub.add_parser("bench", help="recall vs L / query time experiment")
    b.add_argument("--synth", help="synthetic Gaussian data, e.g. n=5000,d=1024")
    b.add_argument("--data", help="dataset file (.csv or .fvecs)")
    b.add_argument("--schemes", default="e2lsh,cs-e2lsh,hcs-e2lsh")
    b.add_argument("--metric", choices=["euclidean", "cosine"])
    b.add_argument("--m", type=int, default=8)
    b.add_argument("--k", type=int, default=50)
    b.add_argument("--L", default=None, help="inclusive range like 1..20 (default 1..50)")
    b.add_argument("--reps", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--w", type=float, default=4.0)
    b.add_argument("--order", type=int, default=2)
    b.add_argument("--queries", type=int, default=None, help="query count (default 100, or 10%% for random split)")
    b.add_argument("--split", choices=["last", "random"], default="last")
    b.add_argument("--normalize", action="store_true", help="scale every point to unit norm")
    b.add_argument("--auto-stop", action="store_true", help="stop once mean recall reaches 0.99")
    output_flags(b)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("validate", help="Monte-Carlo collision and sketch checks")
    v.add_argument("--schemes", default="all")
    v.add_argument("--trials", type=int, default=20000)
    v.add_argument("--d", type=int, default=10000)
    v.add_argument("--w", type=float, default=4.0)
    v.add_argument("--order", type=int, default=2)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--plans", type=int, default=20000)
    v.add_argument("--sketch-m", type=int, default=16)
    v.add_argument("--product-m", type=int, default=4)
    v.add_argument("--skip-diagnostics", action="store_true")
    output_flags(v)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("scaling", help="space and hash-time tables over m")
    s.add_argument("--schemes", default="all")
    s.add_argument("--d", type=int, default=10000)
    s.add_argument("--m", default="8,16,32,64")
    s.add_argument("--orders", default="2,3")
    s.add_argument("--reps", type=int, default=30)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--w", type=float, default=4.0)
    s.add_argument("--no-timing", action="store_true")
    output_flags(s)
    s.set_defaults(func=cmd_scaling)

    i = sub.add_parser("info", help="resolved configuration and sensitivity")
    i.add_argument("--scheme", default="e2lsh")
    i.add_argument("--d", type=int, default=10000)
    i.add_argument("--m", type=int, default=8)
    i.add_argument("--order", type=int, default=2)
    i.add_argument("--w", type=float, default=4.0)
    i.add_argument("--R1", type=float, default=None, help="near distance, or angle in radians")
    i.add_argument("--R2", type=float, default=None, help="far distance, or angle in radians")
    i.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return int(exc.code or 0)
    try:
        with _threads_from_env():
            return args.func(args)
    except UsageError as exc:
        print(f"sketchlsh: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DataFormatError) as exc:
        print(f"sketchlsh: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
