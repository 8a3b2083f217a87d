"""(m, L) LSH index: L independent hash tables plus exact re-ranking."""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .families import DEFAULT_W, FamilyInstance, SchemeKind, make_family


def canonical_key(code) -> bytes:
    """Injective byte key for a hash code.

    int64 codes serialize as a 4-byte little-endian length followed by m
    little-endian int64 values; uint8/bool bit codes as the length followed
    by the packed bits.
    """
    code = np.asarray(code)
    m = code.shape[0]
    head = struct.pack("<I", m)
    if code.dtype == np.uint8 or code.dtype == np.bool_:
        return head + np.packbits(code.astype(np.uint8)).tobytes()
    return head + code.astype("<i8").tobytes()



@dataclass(frozen=True)
class IndexConfig:
    kind: SchemeKind
    m: int = 8
    L: int = 1
    w: float = DEFAULT_W
    order: int = 2
    seed: int = 0
    metric: str | None = None

    def __post_init__(self):
        kind = SchemeKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.metric is None:
            object.__setattr__(self, "metric", kind.metric)
        elif self.metric != kind.metric:
            raise ValueError(f"metric {self.metric!r} does not match {kind.value}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if kind.metric == "euclidean" and not self.w > 0:
            raise ValueError(f"bucket width must be positive, got {self.w}")
        if self.order < 1:
            raise ValueError("order must be >= 1")


@dataclass
class QueryResult:
    ids: np.ndarray
    scores: np.ndarray  # distances (Euclidean) or cosine similarities
    candidates_examined: int
    elapsed: float
    hash_time: float = 0.0
    rank_time: float = 0.0


def metric_scores(points: np.ndarray, q: np.ndarray, metric: str, ids=None) -> np.ndarray:
    """Exact distance (Euclidean) or cosine similarity of q to each row
    (or to the rows listed in ``ids``).

    Cosine similarity against a zero vector is defined as 0.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if ids is None:
        ids = np.arange(points.shape[0], dtype=np.int64)
    return _kernels.row_scores(points, ids, q, metric)


def rank(ids: np.ndarray, scores: np.ndarray, metric: str, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-k by metric, ties broken by ascending id."""
    primary = scores if metric == "euclidean" else -scores
    order = np.lexsort((ids, primary))[:k]
    return ids[order], scores[order]


class LshIndex:
    """L hash tables over one family kind.

    Table t uses a family drawn with label prefix ``table{t}`` from the
    config seed, so the first L tables of a larger index are exactly an
    L-table index.
    """

    def __init__(self, config: IndexConfig, points: np.ndarray):
        self.config = config
        self.points = points
        self.families: list[FamilyInstance] = []
        self.tables: list[dict[bytes, np.ndarray]] = []
        self.table_build_times: list[float] = []

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def build_time(self) -> float:
        return float(sum(self.table_build_times))

    def _add_table(self, t: int) -> None:
        cfg = self.config
        t0 = time.perf_counter()
        fam = make_family(cfg.kind, self.d, cfg.m, cfg.seed, w=cfg.w, order=cfg.order, prefix=f"table{t}")
        codes = fam.hash_batch(self.points)
        uniq, inverse = np.unique(codes, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
        table = {}
        for u in range(len(uniq)):
            table[canonical_key(uniq[u])] = order[bounds[u] : bounds[u + 1]]
        self.families.append(fam)
        self.tables.append(table)
        self.table_build_times.append(time.perf_counter() - t0)

    def candidates(self, q, n_tables: int | None = None) -> np.ndarray:
        """Deduplicated union of the query's buckets over the first n_tables."""
        q = self._check_query(q)
        n_tables = self._n_tables(n_tables)
        found = [
            self.tables[t].get(canonical_key(self.families[t].hash(q)))
            for t in range(n_tables)
        ]
        found = [f for f in found if f is not None]
        if not found:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(found))

    def query(self, q, k: int, n_tables: int | None = None) -> QueryResult:
        """Exact top-k among the candidates from the first ``n_tables`` tables."""
        if k < 1:
            raise ValueError("k must be >= 1")
        q = self._check_query(q)
        n_tables = self._n_tables(n_tables)
        t0 = time.perf_counter()
        found = []
        for t in range(n_tables):
            bucket = self.tables[t].get(canonical_key(self.families[t].hash(q)))
            if bucket is not None:
                found.append(bucket)
        cand = np.unique(np.concatenate(found)) if found else np.empty(0, dtype=np.int64)
        t1 = time.perf_counter()
        if cand.size:
            scores = metric_scores(self.points, q, self.config.metric, ids=cand)
            ids, scores = rank(cand, scores, self.config.metric, k)
        else:
            ids, scores = cand, np.empty(0)
        t2 = time.perf_counter()
        return QueryResult(
            ids=ids,
            scores=scores,
            candidates_examined=int(cand.size),
            elapsed=t2 - t0,
            hash_time=t1 - t0,
            rank_time=t2 - t1,
        )

    def _check_query(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        if q.ndim != 1 or q.shape[0] != self.d:
            raise ValueError(f"query shape {q.shape} does not match dimension {self.d}")
        return q

    def _n_tables(self, n_tables):
        if n_tables is None:
            return len(self.tables)
        if not 1 <= n_tables <= len(self.tables):
            raise ValueError(f"n_tables must lie in [1, {len(self.tables)}]")
        return n_tables


def build(points, config: IndexConfig) -> LshIndex:
    """Hash every point into each of ``config.L`` tables."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-d array (n, d)")
    if points.shape[0] == 0:
        raise ValueError("cannot build an index over zero points")
    index = LshIndex(config, points)
    for t in range(config.L):
        index._add_table(t)
    return index
