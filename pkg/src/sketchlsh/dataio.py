"""Dataset loading (CSV, fvecs), synthetic data, and result files."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .hashcore import rng_for


class DataFormatError(ValueError):
    """Malformed dataset file."""


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    source: str

    def __post_init__(self):
        pts = self.points
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DataFormatError(f"dataset must be a nonempty (n, d) array, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DataFormatError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _parse_row(fields: list[str]) -> list[float] | None:
    try:
        return [float(f) for f in fields]
    except ValueError:
        return None


def load_csv(path) -> Dataset:
    """One vector per line, comma separated. A non-numeric first row is
    treated as a header."""
    rows: list[list[float]] = []
    d = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            values = _parse_row(fields)
            if values is None:
                if lineno == 1:
                    continue
                raise DataFormatError(f"{path}:{lineno}: non-numeric value")
            if not all(math.isfinite(v) for v in values):
                raise DataFormatError(f"{path}:{lineno}: non-finite value")
            if d is None:
                d = len(values)
            elif len(values) != d:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {d} values, found {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(np.asarray(rows, dtype=np.float64), source=f"csv:{path}")


def load_fvecs(path) -> Dataset:
    """Records of a little-endian int32 dimension followed by that many
    little-endian float32 values."""
    raw = Path(path).read_bytes()
    if not raw:
        raise DataFormatError(f"{path}: empty file")
    if len(raw) < 4:
        raise DataFormatError(f"{path}: record 0 truncated")
    d = int(np.frombuffer(raw[:4], dtype="<i4")[0])
    if d <= 0:
        raise DataFormatError(f"{path}: record 0 declares dimension {d}")
    rec = 4 * (d + 1)
    n_full, tail = divmod(len(raw), rec)
    if tail:
        raise DataFormatError(f"{path}: record {n_full} truncated")
    words = np.frombuffer(raw, dtype="<i4").reshape(n_full, d + 1)
    dims = words[:, 0]
    bad = np.flatnonzero(dims != d)
    if bad.size:
        raise DataFormatError(
            f"{path}: record {int(bad[0])} declares dimension {int(dims[bad[0]])}, expected {d}"
        )
    values = np.frombuffer(raw, dtype="<f4").reshape(n_full, d + 1)[:, 1:].astype(np.float64)
    if not np.all(np.isfinite(values)):
        row = int(np.flatnonzero(~np.isfinite(values).all(axis=1))[0])
        raise DataFormatError(f"{path}: record {row} contains non-finite values")
    return Dataset(values, source=f"fvecs:{path}")


def write_fvecs(path, points) -> None:
    points = np.asarray(points, dtype="<f4")
    n, d = points.shape
    out = np.empty((n, d + 1), dtype="<f4")
    out[:, 1:] = points
    out[:, 0] = np.array([d], dtype="<i4").view("<f4")[0]
    out.tofile(path)


def load_dataset(path) -> Dataset:
    suffix = Path(path).suffix.lower()
    if suffix == ".fvecs":
        return load_fvecs(path)
    return load_csv(path)


def synth_gaussian(n: int, d: int, seed: int, batch_rows: int = 4096) -> Dataset:
    """n i.i.d. standard-normal d-vectors, drawn in row batches."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    rng = rng_for(seed)
    points = np.empty((n, d), dtype=np.float64)
    for start in range(0, n, batch_rows):
        stop = min(n, start + batch_rows)
        points[start:stop] = rng.standard_normal((stop - start, d))
    return Dataset(points, source=f"synth:gaussian:n={n},d={d},seed={seed}")


def normalize_rows(points: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    return np.divide(points, norms, out=np.zeros_like(points), where=norms > 0)


def split_queries(
    points: np.ndarray, n_queries: int | None = None, *, mode: str = "last", seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Split into (train, queries).

    ``mode="last"`` takes the last ``n_queries`` rows as queries;
    ``mode="random"`` holds out a random 10% (or ``n_queries`` rows).
    """
    n = points.shape[0]
    if mode == "last":
        q = n_queries if n_queries is not None else 100
        if not 1 <= q < n:
            raise ValueError(f"cannot take {q} queries from {n} points")
        return points[: n - q], points[n - q :]
    if mode == "random":
        q = n_queries if n_queries is not None else max(1, n // 10)
        if not 1 <= q < n:
            raise ValueError(f"cannot take {q} queries from {n} points")
        perm = rng_for(seed).permutation(n)
        qi = np.sort(perm[:q])
        ti = np.sort(perm[q:])
        return points[ti], points[qi]
    raise ValueError(f"unknown split mode {mode!r}")


@dataclass
class ResultsRow:
    scheme: str
    m: int
    L: int
    k: int
    seed: int
    mean_recall: float
    total_query_time_ms: float
    build_time_ms: float
    stored_values: int
    d: int
    n: int
    hash_time_ms: float = 0.0
    rank_time_ms: float = 0.0
    order: int = 0


RESULT_FIELDS = [f.name for f in dataclasses.fields(ResultsRow)]


def _csv_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(
    rows: Sequence[dict],
    path,
    fmt: str = "csv",
    *,
    fields: Sequence[str] | None = None,
    manifest: dict | None = None,
) -> None:
    """Write dict rows as CSV or JSON lines, optionally preceded by a
    manifest (a ``# manifest: {...}`` comment line in CSV, a
    ``{"manifest": ...}`` object in JSON lines)."""
    if fields is None:
        fields = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            if manifest is not None:
                fh.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(fields)
            for row in rows:
                writer.writerow([_csv_value(row[f]) for f in fields])
        elif fmt in ("jsonl", "json-lines"):
            if manifest is not None:
                fh.write(json.dumps({"manifest": manifest}, sort_keys=True) + "\n")
            for row in rows:
                fh.write(json.dumps({f: row[f] for f in fields}) + "\n")
        else:
            raise ValueError(f"unknown output format {fmt!r}")


def write_results(rows: Iterable[ResultsRow], path, fmt: str = "csv", manifest: dict | None = None) -> None:
    write_rows(
        [dataclasses.asdict(r) for r in rows],
        path,
        fmt,
        fields=RESULT_FIELDS,
        manifest=manifest,
    )


def read_rows(path) -> tuple[dict | None, list[dict]]:
    """Read a file written by :func:`write_rows`; returns (manifest, rows).

    CSV values come back as strings.
    """
    text = Path(path).read_text(encoding="utf-8")
    manifest = None
    if path_is_jsonl(path, text):
        rows = []
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if "manifest" in obj and len(obj) == 1:
                manifest = obj["manifest"]
            else:
                rows.append(obj)
        return manifest, rows
    lines = text.splitlines()
    body = []
    for line in lines:
        if line.startswith("# manifest: "):
            manifest = json.loads(line[len("# manifest: ") :])
        elif not line.startswith("#"):
            body.append(line)
    return manifest, list(csv.DictReader(io.StringIO("\n".join(body))))


def path_is_jsonl(path, text: str) -> bool:
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".jsonl", ".ndjson"):
        return True
    if ext == ".csv":
        return False
    return text.lstrip().startswith("{")
