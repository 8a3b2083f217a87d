"""Hot numeric kernels.

Every kernel has a numba implementation and a pure-numpy implementation with
identical semantics. The numba path is used when numba imports and the
environment variable ``SKETCHLSH_DISABLE_NUMBA`` is unset (or ``0``).

Both paths accumulate sketch buckets in ascending input-index order, so the
two backends produce bit-identical sketches.
"""

from __future__ import annotations

import os

import numpy as np

MERSENNE_61 = (1 << 61) - 1

_P = np.uint64(MERSENNE_61)
_MASK32 = np.uint64(0xFFFFFFFF)
_S29 = np.uint64(29)
_S32 = np.uint64(32)
_S61 = np.uint64(61)
_LO29 = np.uint64((1 << 29) - 1)
_EIGHT = np.uint64(8)

_DISABLED = os.environ.get("SKETCHLSH_DISABLE_NUMBA", "0").strip().lower() not in (
    "",
    "0",
    "false",
    "no",
)

try:
    if _DISABLED:
        raise ImportError("numba disabled by SKETCHLSH_DISABLE_NUMBA")
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"

# Rows per chunk in the numpy batch kernels; bounds the transient index array.
_CHUNK_ELEMS = 1 << 22


# --------------------------------------------------------------------------
# Arithmetic mod 2^61 - 1 on uint64 lanes
# --------------------------------------------------------------------------


def _reduce61_np(x):
    x = (x & _P) + (x >> _S61)
    return np.where(x >= _P, x - _P, x)


def _mulmod61_np(a, x):
    """a * x mod (2^61 - 1) for uint64 arrays with a, x < 2^61."""
    a_lo = a & _MASK32
    a_hi = a >> _S32
    x_lo = x & _MASK32
    x_hi = x >> _S32
    lo = a_lo * x_lo
    mid = a_hi * x_lo + a_lo * x_hi
    hi = a_hi * x_hi
    # 2^64 = 8 (mod p); mid * 2^32 = mid_hi + mid_lo * 2^32 (mod p)
    r = (
        hi * _EIGHT
        + (mid >> _S29)
        + ((mid & _LO29) << _S32)
        + (lo & _P)
        + (lo >> _S61)
    )
    return _reduce61_np(r)


def twowise_table_numpy(a: int, b: int, m: int, keys: np.ndarray) -> np.ndarray:
    x = np.asarray(keys, dtype=np.uint64)
    av = np.full(x.shape[0], a, dtype=np.uint64)
    v = _mulmod61_np(av, x) + np.uint64(b)
    v = _reduce61_np(v)
    return (v % np.uint64(m)).astype(np.int64)


def cs_batch_numpy(X: np.ndarray, h: np.ndarray, s: np.ndarray, m: int) -> np.ndarray:
    n, d = X.shape
    out = np.empty((n, m), dtype=np.float64)
    if n == 0:
        return out
    rows = max(1, _CHUNK_ELEMS // max(d, 1))
    for start in range(0, n, rows):
        Xc = X[start : start + rows]
        nc = Xc.shape[0]
        idx = (np.arange(nc, dtype=np.int64)[:, None] * m + h[None, :]).ravel()
        acc = np.bincount(idx, weights=(Xc * s).ravel(), minlength=nc * m)
        out[start : start + nc] = acc.reshape(nc, m)
    return out


def expand_modes(
    h_modes: list[np.ndarray], s_modes: list[np.ndarray], mode_m: tuple[int, ...]
) -> tuple[np.ndarray, np.ndarray]:
    """Per-flat-index output cell and sign for a tensorized input.

    Flat index j = i_1 + i_2 d_1 + ..., so mode 1 varies fastest.
    """
    cell = h_modes[0].astype(np.int64)
    sign = s_modes[0].astype(np.float64)
    stride = mode_m[0]
    for k in range(1, len(h_modes)):
        cell = (h_modes[k][:, None] * stride + cell[None, :]).ravel()
        sign = (s_modes[k][:, None] * sign[None, :]).ravel()
        stride *= mode_m[k]
    return cell, sign


def hcs_batch_numpy(
    X: np.ndarray,
    h_modes: list[np.ndarray],
    s_modes: list[np.ndarray],
    mode_m: tuple[int, ...],
) -> np.ndarray:
    d = X.shape[1]
    cell, sign = expand_modes(h_modes, s_modes, mode_m)
    m = int(np.prod(mode_m))
    return cs_batch_numpy(X, cell[:d], sign[:d], m)


def row_scores_numpy(X: np.ndarray, ids: np.ndarray, q: np.ndarray, cosine: bool) -> np.ndarray:
    rows = X[ids]
    if not cosine:
        diff = rows - q
        return np.sqrt((diff * diff).sum(axis=1))
    dots = (rows * q).sum(axis=1)
    norms = np.sqrt((rows * rows).sum(axis=1)) * np.sqrt((q * q).sum())
    out = np.zeros_like(dots)
    np.divide(dots, norms, out=out, where=norms > 0)
    return out


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True, inline="always")
    def _mulmod61_nb(a, x):
        p = np.uint64(MERSENNE_61)
        m32 = np.uint64(0xFFFFFFFF)
        a_lo = a & m32
        a_hi = a >> np.uint64(32)
        x_lo = x & m32
        x_hi = x >> np.uint64(32)
        lo = a_lo * x_lo
        mid = a_hi * x_lo + a_lo * x_hi
        hi = a_hi * x_hi
        r = (
            hi * np.uint64(8)
            + (mid >> np.uint64(29))
            + ((mid & np.uint64((1 << 29) - 1)) << np.uint64(32))
            + (lo & p)
            + (lo >> np.uint64(61))
        )
        r = (r & p) + (r >> np.uint64(61))
        if r >= p:
            r -= p
        return r

    @numba.njit(cache=True)
    def _twowise_table_nb(a, b, m, keys):
        p = np.uint64(MERSENNE_61)
        d = keys.shape[0]
        out = np.empty(d, dtype=np.int64)
        au = np.uint64(a)
        bu = np.uint64(b)
        mu = np.uint64(m)
        for i in range(d):
            v = _mulmod61_nb(au, keys[i]) + bu
            if v >= p:
                v -= p
            out[i] = np.int64(v % mu)
        return out

    @numba.njit(cache=True)
    def _cs_batch_nb(X, h, s, m):
        n, d = X.shape
        out = np.zeros((n, m), dtype=np.float64)
        for r in range(n):
            for j in range(d):
                out[r, h[j]] += s[j] * X[r, j]
        return out

    @numba.njit(cache=True)
    def _hcs_batch_nb(X, H, S, mode_d, mode_m):
        # H, S: (N, max_d) per-mode tables, rows padded past mode_d[k]
        n, d = X.shape
        order = mode_d.shape[0]
        m = 1
        for k in range(order):
            m *= mode_m[k]
        out = np.zeros((n, m), dtype=np.float64)
        # expand per-mode tables to per-index cell/sign in place, mode by
        # mode; block ik of mode k is written from block 0, so go downward
        padded = 1
        for k in range(order):
            padded *= mode_d[k]
        cell = np.empty(padded, dtype=np.int64)
        sign = np.empty(padded, dtype=np.float64)
        length = mode_d[0]
        for t in range(length):
            cell[t] = H[0, t]
            sign[t] = S[0, t]
        stride = mode_m[0]
        for k in range(1, order):
            for ik in range(mode_d[k] - 1, -1, -1):
                base = ik * length
                hc = H[k, ik] * stride
                sc = S[k, ik]
                for t in range(length):
                    cell[base + t] = hc + cell[t]
                    sign[base + t] = sc * sign[t]
            length *= mode_d[k]
            stride *= mode_m[k]
        for r in range(n):
            for j in range(d):
                out[r, cell[j]] += sign[j] * X[r, j]
        return out

    @numba.njit(cache=True)
    def _row_scores_nb(X, ids, q, cosine):
        d = X.shape[1]
        out = np.empty(ids.shape[0], dtype=np.float64)
        qq = 0.0
        for j in range(d):
            qq += q[j] * q[j]
        qn = np.sqrt(qq)
        for t in range(ids.shape[0]):
            r = ids[t]
            if cosine:
                dot = 0.0
                xx = 0.0
                for j in range(d):
                    dot += X[r, j] * q[j]
                    xx += X[r, j] * X[r, j]
                den = np.sqrt(xx) * qn
                out[t] = dot / den if den > 0 else 0.0
            else:
                acc = 0.0
                for j in range(d):
                    diff = X[r, j] - q[j]
                    acc += diff * diff
                out[t] = np.sqrt(acc)
        return out



def twowise_table(a: int, b: int, m: int, keys: np.ndarray) -> np.ndarray:
    """Evaluate ((a x + b) mod p) mod m for every key x (uint64, x < p)."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    if HAVE_NUMBA:
        return _twowise_table_nb(a, b, m, keys)
    return twowise_table_numpy(a, b, m, keys)


def splitmix_keys(d: int) -> np.ndarray:
    """splitmix64(i) mod p for i = 0..d-1, as uint64."""
    z = np.arange(d, dtype=np.uint64) + np.uint64(0x9E3779B97F4A7C15)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return z % np.uint64(MERSENNE_61)


def cs_batch(X: np.ndarray, h: np.ndarray, s: np.ndarray, m: int) -> np.ndarray:
    """Count sketch of every row of X: out[r, h[j]] += s[j] X[r, j]."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if HAVE_NUMBA:
        return _cs_batch_nb(X, h, s, m)
    return cs_batch_numpy(X, h, s, m)


def hcs_batch(
    X: np.ndarray,
    H: np.ndarray,
    S: np.ndarray,
    mode_d: np.ndarray,
    mode_m: np.ndarray,
) -> np.ndarray:
    """Higher-order count sketch of every row of X, flattened mode-1-fastest.

    H and S hold the per-mode bucket and sign tables row by row (see
    ``stack_modes``). Rows of X may be shorter than prod(mode_d); missing
    entries act as zero.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if HAVE_NUMBA:
        return _hcs_batch_nb(X, H, S, mode_d, mode_m)
    h_modes = [H[k, : mode_d[k]] for k in range(len(mode_d))]
    s_modes = [S[k, : mode_d[k]] for k in range(len(mode_d))]
    return hcs_batch_numpy(X, h_modes, s_modes, tuple(int(v) for v in mode_m))


def stack_modes(h_modes, s_modes):
    """Pack per-mode tables into (N, max_d) arrays; padding entries are unused."""
    width = max(len(h) for h in h_modes)
    H = np.zeros((len(h_modes), width), dtype=np.int64)
    S = np.zeros((len(s_modes), width), dtype=np.float64)
    for k, (h, s) in enumerate(zip(h_modes, s_modes)):
        H[k, : len(h)] = h
        S[k, : len(s)] = s
    return H, S


def row_scores(X: np.ndarray, ids: np.ndarray, q: np.ndarray, metric: str) -> np.ndarray:
    """Distance (euclidean) or cosine similarity between q and rows X[ids].

    Each row's score depends only on that row, so scoring a subset gives
    exactly the values a full scan would. Zero vectors have similarity 0.
    """
    if metric not in ("euclidean", "cosine"):
        raise ValueError(f"unknown metric {metric!r}")
    ids = np.asarray(ids, dtype=np.int64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    if HAVE_NUMBA:
        return _row_scores_nb(X, ids, q, metric == "cosine")
    return row_scores_numpy(X, ids, q, metric == "cosine")
