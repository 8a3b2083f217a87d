"""Ground truth, recall, Monte-Carlo collision estimates, diagnostics, and
space/time accounting for the six families."""

from __future__ import annotations

import heapq
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .families import DEFAULT_W, FamilyInstance, SchemeKind, make_family
from .hashcore import GaussianMatrixSpec, derive_seed, rng_for
from .index import IndexConfig, LshIndex, build, metric_scores
from .sketch import CsPlan, HcsPlan, cs_apply, hcs_apply, make_cs_plan, make_hcs_plan
from .theory import angle_between, theoretical_collision


# --------------------------------------------------------------------------
# Ground truth and recall
# --------------------------------------------------------------------------


def brute_topk(points, q, k: int, metric: str) -> list[int]:
    """Exact top-k ids, ties broken by ascending id (heap selection)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    points = np.asarray(points, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if points.ndim != 2 or q.shape != (points.shape[1],):
        raise ValueError("query dimension does not match points")
    scores = metric_scores(points, q, metric)
    keyed = scores if metric == "euclidean" else -scores
    best = heapq.nsmallest(k, zip(keyed.tolist(), range(len(keyed))))
    return [i for _, i in best]


def brute_topk_sorted(points, q, k: int, metric: str) -> list[int]:
    """Reference top-k via a full stable sort of every score."""
    scores = metric_scores(np.asarray(points, float), np.asarray(q, float), metric)
    keyed = scores if metric == "euclidean" else -scores
    order = sorted(range(len(keyed)), key=lambda i: (keyed[i], i))
    return order[:k]


def recall(truth: Iterable[int], retrieved: Iterable[int]) -> float:
    truth = set(int(i) for i in truth)
    if not truth:
        raise ValueError("ground-truth set is empty")
    return len(truth & set(int(i) for i in retrieved)) / len(truth)


# --------------------------------------------------------------------------
# Test geometry
# --------------------------------------------------------------------------


def _unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def pair_at_angle(d: int, theta: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Two random unit vectors at angle theta."""
    if d < 2:
        raise ValueError("need d >= 2")
    if not 0.0 <= theta <= math.pi:
        raise ValueError("theta outside [0, pi]")
    rng = rng_for(seed)
    u = _unit(rng, d)
    e = rng.standard_normal(d)
    e -= (e @ u) * u
    e -= (e @ u) * u
    e /= np.linalg.norm(e)
    v = math.cos(theta) * u + math.sin(theta) * e
    return u, v


def pair_at_distance(d: int, R: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random unit p and q = p + R e with e a random unit direction."""
    if R < 0:
        raise ValueError("R must be >= 0")
    rng = rng_for(seed)
    p = _unit(rng, d)
    e = _unit(rng, d)
    return p, p + R * e


# --------------------------------------------------------------------------
# Monte-Carlo collision estimates
# --------------------------------------------------------------------------


@dataclass
class CollisionEstimate:
    kind: SchemeKind
    trials: int
    hits: int
    theoretical: float
    m: int = 1
    coordinate_rate: float = 0.0

    @property
    def empirical(self) -> float:
        return self.hits / self.trials

    @property
    def abs_error(self) -> float:
        return abs(self.empirical - self.theoretical)

    @property
    def bound(self) -> float:
        """3-sigma binomial half-width at the theoretical rate."""
        p = self.theoretical
        return 3.0 * math.sqrt(max(p * (1.0 - p), 0.0) / self.trials)


def estimate_collision(
    kind,
    u,
    v,
    trials: int,
    seed: int,
    *,
    m: int = 1,
    w: float = DEFAULT_W,
    order: int = 2,
) -> CollisionEstimate:
    """Draw ``trials`` independent m-code families of ``kind`` and count how
    often u and v receive identical codes.

    ``hits`` counts full-code collisions; ``coordinate_rate`` is the mean
    per-coordinate agreement. With m = 1 the two coincide.
    """
    kind = SchemeKind.parse(kind)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("u and v must be vectors of equal length")
    pair = np.stack([u, v])
    d = u.shape[0]
    hits = 0
    agree = 0
    for t in range(trials):
        fam = make_family(kind, d, m, seed, w=w, order=order, prefix=f"trial{t}")
        codes = fam.hash_batch(pair)
        same = codes[0] == codes[1]
        agree += int(same.sum())
        hits += bool(same.all())
    theory = theoretical_collision(kind, u, v, w=w) ** m
    return CollisionEstimate(
        kind=kind,
        trials=trials,
        hits=hits,
        theoretical=theory,
        m=m,
        coordinate_rate=agree / (trials * m),
    )


# --------------------------------------------------------------------------
# Sketch diagnostics
# --------------------------------------------------------------------------


@dataclass
class SketchDiagnostics:
    variances: np.ndarray
    expected_variance: float
    max_abs_correlation: float
    mean_squared_norm: float
    plans: int

    @property
    def max_relative_variance_error(self) -> float:
        if self.expected_variance == 0:
            return float(np.max(np.abs(self.variances)))
        return float(np.max(np.abs(self.variances / self.expected_variance - 1.0)))


def sketch_samples(plan_kind: str, p, m: int, plans: int, seed: int, order: int = 2) -> np.ndarray:
    """(plans, m) matrix of sketches of p under independent plans."""
    p = np.asarray(p, dtype=np.float64)
    d = p.shape[0]
    out = np.empty((plans, m))
    for t in range(plans):
        if plan_kind == "cs":
            out[t] = cs_apply(make_cs_plan(seed, d, m, prefix=f"plan{t}"), p)
        elif plan_kind == "hcs":
            out[t] = hcs_apply(make_hcs_plan(seed, d, order, m=m, prefix=f"plan{t}"), p)
        else:
            raise ValueError(f"plan kind must be 'cs' or 'hcs', got {plan_kind!r}")
    return out


def sketch_diagnostics(
    plan_kind: str, p, m: int, plans: int, seed: int, order: int = 2
) -> SketchDiagnostics:
    """Per-coordinate variance and largest cross-coordinate correlation of the
    sketch of a fixed p over independent plan draws."""
    if plans < 100:
        raise ValueError("need at least 100 plans")
    p = np.asarray(p, dtype=np.float64)
    samples = sketch_samples(plan_kind, p, m, plans, seed, order)
    variances = samples.var(axis=0, ddof=1)
    if m > 1 and np.all(variances > 0):
        corr = np.corrcoef(samples, rowvar=False)
        max_corr = float(np.max(np.abs(corr[~np.eye(m, dtype=bool)])))
    else:
        max_corr = 0.0
    return SketchDiagnostics(
        variances=variances,
        expected_variance=float(p @ p) / m,
        max_abs_correlation=max_corr,
        mean_squared_norm=float(np.mean((samples * samples).sum(axis=1))),
        plans=plans,
    )


# --------------------------------------------------------------------------
# Space and time
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamCount:
    scheme: SchemeKind
    stored_values: int
    formula_values: int
    coefficient_values: int


def param_count(fam: FamilyInstance) -> ParamCount:
    """Count the materialized numbers one m-code family stores.

    Hash families are counted with their full evaluation tables (one bucket
    and one sign entry per input index / mode index); ``coefficient_values``
    is the alternative count with two integers per 2-wise family.
    """
    proj = fam.projection
    offsets = 0 if fam.offsets is None else int(fam.offsets.values.size)
    if isinstance(proj, GaussianMatrixSpec):
        stored = int(proj.values.size)
        formula = fam.m * fam.d
        coeff = stored
    elif isinstance(proj, CsPlan):
        stored = int(proj.h_table.size + proj.s_table.size)
        formula = 2 * fam.d
        coeff = 4
    elif isinstance(proj, HcsPlan):
        stored = sum(int(h.size + s.size) for h, s in proj.mode_tables())
        formula = 2 * sum(proj.mode_d)
        coeff = 4 * proj.order
    else:
        raise TypeError(f"unknown projection {type(proj).__name__}")
    return ParamCount(
        scheme=fam.kind,
        stored_values=stored + offsets,
        formula_values=formula + (fam.m if fam.kind.metric == "euclidean" else 0),
        coefficient_values=coeff + offsets,
    )


def median_of_means(samples: Sequence[float], groups: int = 5) -> float:
    samples = list(samples)
    groups = max(1, min(groups, len(samples)))
    size = len(samples) // groups
    means = [statistics.fmean(samples[g * size : (g + 1) * size]) for g in range(groups)]
    return statistics.median(means)


def time_hash(
    kind,
    d: int,
    m: int,
    reps: int = 30,
    seed: int = 0,
    *,
    warmup: int = 5,
    order: int = 2,
    w: float = DEFAULT_W,
) -> float:
    """Median-of-means wall time (seconds) of one single-vector hash call."""
    if reps < 10:
        raise ValueError("reps must be >= 10")
    fam = make_family(kind, d, m, seed, w=w, order=order)
    p = rng_for(derive_seed(seed, "timing/input")).standard_normal(d)
    for _ in range(warmup):
        fam.hash(p)
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fam.hash(p)
        samples.append(time.perf_counter() - t0)
    return median_of_means(samples)


# --------------------------------------------------------------------------
# Recall experiment
# --------------------------------------------------------------------------


@dataclass
class RecallCell:
    """One (repetition, L) measurement."""

    repetition: int
    seed: int
    L: int
    mean_recall: float
    total_query_time: float
    hash_time: float
    rank_time: float
    build_time: float
    mean_candidates: float


@dataclass
class RecallPoint:
    L: int
    mean_recall: float
    total_query_time: float
    build_time: float
    hash_time: float = 0.0
    rank_time: float = 0.0
    mean_candidates: float = 0.0


@dataclass
class RecallCurve:
    kind: SchemeKind
    points: list[RecallPoint] = field(default_factory=list)
    cells: list[RecallCell] = field(default_factory=list)

    def recall_at(self, L: int) -> float:
        for pt in self.points:
            if pt.L == L:
                return pt.mean_recall
        raise KeyError(L)


def ground_truth(points, queries, k: int, metric: str) -> list[list[int]]:
    return [brute_topk(points, q, k, metric) for q in queries]


def run_recall_experiment(
    points,
    queries,
    kind,
    *,
    L_values: Sequence[int],
    k: int = 50,
    m: int = 8,
    repetitions: int = 20,
    seed: int = 0,
    w: float = DEFAULT_W,
    order: int = 2,
    auto_stop: float | None = None,
    truth: list[list[int]] | None = None,
) -> RecallCurve:
    """Recall against exact top-k for each L, averaged over repetitions.

    Each repetition builds one index with max(L_values) tables from a fresh
    seed and answers queries with its first L tables, which is the same as
    building an L-table index from that seed. With ``auto_stop`` set, the
    sweep ends at the first L whose mean recall reaches it.
    """
    kind = SchemeKind.parse(kind)
    points = np.ascontiguousarray(points, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    L_values = sorted(set(int(L) for L in L_values))
    if not L_values or L_values[0] < 1:
        raise ValueError("L values must be >= 1")
    metric = kind.metric
    if truth is None:
        truth = ground_truth(points, queries, k, metric)
    rep_seeds = [derive_seed(seed, f"rep{r}") for r in range(repetitions)]
    indexes = [
        build(points, IndexConfig(kind, m=m, L=L_values[-1], w=w, order=order, seed=s))
        for s in rep_seeds
    ]
    curve = RecallCurve(kind=kind)
    for L in L_values:
        cells = []
        for r, (s, index) in enumerate(zip(rep_seeds, indexes)):
            cells.append(_measure(index, queries, truth, k, L, r, s))
        curve.cells.extend(cells)
        pt = RecallPoint(
            L=L,
            mean_recall=statistics.fmean(c.mean_recall for c in cells),
            total_query_time=statistics.fmean(c.total_query_time for c in cells),
            build_time=statistics.fmean(c.build_time for c in cells),
            hash_time=statistics.fmean(c.hash_time for c in cells),
            rank_time=statistics.fmean(c.rank_time for c in cells),
            mean_candidates=statistics.fmean(c.mean_candidates for c in cells),
        )
        curve.points.append(pt)
        if auto_stop is not None and pt.mean_recall >= auto_stop:
            break
    return curve


def _measure(index: LshIndex, queries, truth, k, L, rep, seed) -> RecallCell:
    recalls = []
    total = hashing = ranking = 0.0
    cands = 0
    for q, S in zip(queries, truth):
        res = index.query(q, k, n_tables=L)
        recalls.append(recall(S, res.ids))
        total += res.elapsed
        hashing += res.hash_time
        ranking += res.rank_time
        cands += res.candidates_examined
    return RecallCell(
        repetition=rep,
        seed=seed,
        L=L,
        mean_recall=statistics.fmean(recalls),
        total_query_time=total,
        hash_time=hashing,
        rank_time=ranking,
        build_time=float(sum(index.table_build_times[:L])),
        mean_candidates=cands / len(queries),
    )
