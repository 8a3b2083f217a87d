"""End-to-end acceptance checks, one test per criterion.

Every test records a ``criterion N: PASS|FAIL ...`` line (shown in the
pytest terminal summary) before asserting, so a failing criterion is still
reported with its measured numbers. All seeds are fixed up front.

Run directly with ``python tests/test_acceptance.py`` to print only the
verdict lines.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from sketchlsh.dataio import normalize_rows, split_queries, synth_gaussian
from sketchlsh.evaluation import (
    brute_topk,
    brute_topk_sorted,
    estimate_collision,
    ground_truth,
    pair_at_angle,
    pair_at_distance,
    param_count,
    recall,
    run_recall_experiment,
    sketch_diagnostics,
    time_hash,
)
from sketchlsh.families import COSINE_KINDS, EUCLIDEAN_KINDS, SchemeKind, make_family
from sketchlsh.hashcore import derive_seed, rng_for
from sketchlsh.index import IndexConfig, build
from sketchlsh.sketch import cs_apply, hcs_apply, make_cs_plan, make_hcs_plan

SEED = 0
D = 10_000
TRIALS = 20_000

pytestmark = pytest.mark.slow


def _verdict(log, number: int, ok: bool, detail: str) -> None:
    log(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


def _collision_sweep(kinds, geometries, tol):
    worst = (0.0, "")
    rows = []
    for kind in kinds:
        for label, (u, v) in geometries:
            est = estimate_collision(
                kind, u, v, TRIALS, derive_seed(SEED, f"acc/{kind.value}/{label}"), order=2
            )
            rows.append((kind.value, label, est.empirical, est.theoretical, est.abs_error, est.bound))
            if est.abs_error > worst[0]:
                worst = (est.abs_error, f"{kind.value} {label}")
    ok = all(r[4] <= tol for r in rows)
    return ok, worst, rows


def test_criterion_1_cosine_collision_law(acceptance_log):
    t0 = time.perf_counter()
    geoms = [
        (f"theta={t:.4f}", pair_at_angle(D, t, derive_seed(SEED, f"acc/angle/{i}")))
        for i, t in enumerate((math.pi / 6, math.pi / 3, math.pi / 2))
    ]
    ok, worst, _ = _collision_sweep(COSINE_KINDS, geoms, 0.015)
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 120
    _verdict(acceptance_log, 1, ok, f"max |err|={worst[0]:.4f} ({worst[1]}) tol=0.015 time={elapsed:.0f}s/120s")
    assert ok


def test_criterion_2_euclidean_collision_law(acceptance_log):
    t0 = time.perf_counter()
    geoms = [
        (f"R={R:g}", pair_at_distance(D, R, derive_seed(SEED, f"acc/dist/{i}")))
        for i, R in enumerate((0.5, 1.0, 2.0, 4.0))
    ]
    ok, worst, _ = _collision_sweep(EUCLIDEAN_KINDS, geoms, 0.02)
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 180
    _verdict(acceptance_log, 2, ok, f"max |err|={worst[0]:.4f} ({worst[1]}) tol=0.02 time={elapsed:.0f}s/180s")
    assert ok


def test_criterion_3_product_law(acceptance_log):
    parts = []
    ok = True
    cases = [
        ("cs-srp", pair_at_angle(D, math.pi / 3, derive_seed(SEED, "acc/product/angle"))),
        ("cs-e2lsh", pair_at_distance(D, 1.0, derive_seed(SEED, "acc/product/dist"))),
    ]
    for kind, (u, v) in cases:
        est = estimate_collision(kind, u, v, TRIALS, derive_seed(SEED, f"acc/product/{kind}"), m=4)
        predicted = est.coordinate_rate**4
        err = abs(est.empirical - predicted)
        ok &= err <= 0.02
        parts.append(f"{kind}: full={est.empirical:.4f} coord^4={predicted:.4f} |err|={err:.4f}")
    _verdict(acceptance_log, 3, ok, "; ".join(parts) + " tol=0.02")
    assert ok


def test_criterion_4_sketch_diagnostics(acceptance_log):
    # The 5% bound is about 2.5 standard errors of a per-coordinate variance
    # at 5,000 plans, so the maximum over 16 coordinates exceeds it for about
    # a fifth of seeds even with exact hashing. The decisive run uses 20,000
    # plans (5% is then 5 standard errors); the 5,000-plan figure is reported
    # alongside it.
    t0 = time.perf_counter()
    p = rng_for(derive_seed(SEED, "acc/diag/p")).standard_normal(D)
    parts = []
    ok = True
    for kind in ("cs", "hcs"):
        seed = derive_seed(SEED, f"acc/diag/{kind}")
        small = sketch_diagnostics(kind, p, 16, 5000, seed, order=2)
        diag = sketch_diagnostics(kind, p, 16, 20_000, seed, order=2)
        var_err = diag.max_relative_variance_error
        ok &= var_err <= 0.05 and diag.max_abs_correlation < 0.05
        parts.append(
            f"{kind}: max var err={var_err:.4f} max|rho|={diag.max_abs_correlation:.4f} "
            f"(5000 plans: {small.max_relative_variance_error:.4f}, {small.max_abs_correlation:.4f})"
        )
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 300
    _verdict(acceptance_log, 4, ok, "; ".join(parts) + f" tol=0.05 plans=20000 time={elapsed:.0f}s/300s")
    assert ok


def test_criterion_5_space_exactness(acceptance_log):
    mode_sum = {2: 100 + 100, 3: 22 + 22 + 21}
    expected = {
        "e2lsh": lambda m, n: m * D + m,
        "srp": lambda m, n: m * D,
        "cs-e2lsh": lambda m, n: 2 * D + m,
        "cs-srp": lambda m, n: 2 * D,
        "hcs-e2lsh": lambda m, n: 2 * mode_sum[n] + m,
        "hcs-srp": lambda m, n: 2 * mode_sum[n],
    }
    mismatches = []
    hcs_tables = {}
    checked = 0
    for kind in SchemeKind:
        for order in (2, 3) if kind.projection == "hcs" else (2,):
            for m in (8, 16, 32, 64):
                pc = param_count(make_family(kind, D, m, SEED, order=order))
                want = expected[kind.value](m, order)
                checked += 1
                if not pc.stored_values == pc.formula_values == want:
                    mismatches.append(f"{kind.value} N={order} m={m}: {pc.stored_values} vs {want}")
                if kind.projection == "hcs":
                    tables = pc.stored_values - (m if kind.metric == "euclidean" else 0)
                    hcs_tables.setdefault((kind.value, order), set()).add(tables)
    constant = all(len(v) == 1 for v in hcs_tables.values())
    ok = not mismatches and constant
    detail = f"{checked} (scheme, N, m) cells exact; HCS family tables constant in m: {constant}"
    if mismatches:
        detail = "mismatches: " + "; ".join(mismatches[:3])
    _verdict(acceptance_log, 5, ok, detail)
    assert ok


def test_criterion_6_time_scaling(acceptance_log):
    t0 = time.perf_counter()
    ratios = {}
    for kind in ("e2lsh", "cs-e2lsh", "cs-srp", "hcs-e2lsh", "hcs-srp"):
        t8 = time_hash(kind, D, 8, reps=30, seed=SEED)
        t64 = time_hash(kind, D, 64, reps=30, seed=SEED)
        ratios[kind] = t64 / t8
    elapsed = time.perf_counter() - t0
    ok = ratios["e2lsh"] >= 4 and all(r <= 1.5 for k, r in ratios.items() if k != "e2lsh") and elapsed < 120
    detail = " ".join(f"{k}={r:.2f}" for k, r in ratios.items())
    _verdict(acceptance_log, 6, ok, f"time(m=64)/time(m=8): {detail} (e2lsh>=4, others<=1.5) time={elapsed:.0f}s/120s")
    assert ok


def test_criterion_7_recall_parity(acceptance_log):
    t0 = time.perf_counter()
    points = normalize_rows(synth_gaussian(5050, 1024, derive_seed(SEED, "acc/recall/data")).points)
    train, queries = split_queries(points, 50)
    gaps = {}
    for baseline, variants in (("e2lsh", ("cs-e2lsh", "hcs-e2lsh")), ("srp", ("cs-srp", "hcs-srp"))):
        metric = SchemeKind.parse(baseline).metric
        truth = ground_truth(train, queries, 10, metric)
        curves = {}
        for kind in (baseline, *variants):
            curve = run_recall_experiment(
                train, queries, kind, L_values=range(1, 21), k=10, m=8, repetitions=5,
                seed=derive_seed(SEED, "acc/recall/tables"), order=2, truth=truth,
            )
            curves[kind] = np.array([pt.mean_recall for pt in curve.points])
        for kind in variants:
            gaps[kind] = float(np.max(np.abs(curves[kind] - curves[baseline])))
    elapsed = time.perf_counter() - t0
    ok = all(g <= 0.07 for g in gaps.values()) and elapsed < 900
    detail = " ".join(f"{k}={g:.3f}" for k, g in gaps.items())
    _verdict(acceptance_log, 7, ok, f"max recall gap over L=1..20: {detail} tol=0.07 time={elapsed:.0f}s/900s")
    assert ok


def test_criterion_8_structural_identities(acceptance_log):
    rng = np.random.default_rng(derive_seed(SEED, "acc/struct"))
    failures = []

    X = rng.standard_normal((64, 1000)) * 2.0
    for cs_kind, hcs_kind in (("cs-e2lsh", "hcs-e2lsh"), ("cs-srp", "hcs-srp")):
        for s in range(10):
            a = make_family(cs_kind, 1000, 8, s).hash_batch(X)
            b = make_family(hcs_kind, 1000, 8, s, order=1).hash_batch(X)
            if a.tobytes() != b.tobytes():
                failures.append(f"N=1 {hcs_kind} != {cs_kind}")

    for kind in COSINE_KINDS:
        fam = make_family(kind, 1000, 16, 1)
        for c in (1e-9, 0.5, 3.0, 1e9):
            if not np.array_equal(fam.hash_batch(c * X), fam.hash_batch(X)):
                failures.append(f"scale {kind.value} c={c}")

    for apply, plan in ((cs_apply, make_cs_plan(2, 1000, 16)), (hcs_apply, make_hcs_plan(2, 1000, 2, m=16))):
        for _ in range(20):
            p, q = rng.standard_normal((2, 1000))
            a, b = rng.standard_normal(2)
            lhs = apply(plan, a * p + b * q)
            rhs = a * apply(plan, p) + b * apply(plan, q)
            if np.max(np.abs(lhs - rhs)) > 1e-12 * np.max(np.abs(rhs)):
                failures.append("linearity")

    pts = normalize_rows(rng.standard_normal((1000, 64)))
    queries = normalize_rows(rng.standard_normal((20, 64)))
    for kind in SchemeKind:
        idx = build(pts, IndexConfig(kind, m=8, L=20, seed=3))
        truth = [brute_topk(pts, q, 10, kind.metric) for q in queries]
        r1 = r20 = 0.0
        for q, S in zip(queries, truth):
            prev = set()
            for L in range(1, 21):
                cur = set(idx.candidates(q, L).tolist())
                if not prev <= cur:
                    failures.append(f"monotonicity {kind.value}")
                prev = cur
            r1 += recall(S, idx.query(q, 10, n_tables=1).ids)
            r20 += recall(S, idx.query(q, 10, n_tables=20).ids)
        if r20 < r1:
            failures.append(f"recall(L=20) < recall(L=1) {kind.value}")
        for i in range(0, 1000, 50):
            if idx.query(pts[i], 1).ids.tolist() != [i]:
                failures.append(f"self-retrieval {kind.value} id={i}")

    ok = not failures
    detail = "N=1 identity, scale invariance, linearity 1e-12, monotone candidates, self-retrieval all hold"
    if failures:
        detail = f"{len(failures)} violations, first: {failures[0]}"
    _verdict(acceptance_log, 8, ok, detail)
    assert ok


def test_criterion_9_oracle_agreement(acceptance_log):
    rng = np.random.default_rng(derive_seed(SEED, "acc/oracle"))
    disagreements = 0
    for t in range(100):
        n = int(rng.integers(1, 1001))
        d = int(rng.integers(1, 33))
        if t % 3 == 0:
            pts = rng.integers(-2, 3, (n, d)).astype(float)  # exact ties
            q = rng.integers(-2, 3, d).astype(float)
        else:
            pts = rng.standard_normal((n, d))
            q = rng.standard_normal(d)
        k = int(rng.integers(1, n + 1))
        metric = "euclidean" if t % 2 == 0 else "cosine"
        if brute_topk(pts, q, k, metric) != brute_topk_sorted(pts, q, k, metric):
            disagreements += 1
    ok = disagreements == 0
    _verdict(acceptance_log, 9, ok, f"heap oracle vs full sort: {100 - disagreements}/100 instances identical")
    assert ok


if __name__ == "__main__":
    import sys

    lines: list[str] = []
    status = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn(lines.append)
            except AssertionError:
                status = 1
            print(lines[-1], flush=True)
    sys.exit(status)
