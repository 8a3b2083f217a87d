"""Count sketch and higher-order count sketch of dense vectors.

A higher-order sketch treats a length-d vector as an N-mode tensor with
mode sizes ``mode_d`` (zero-padded when d does not factor), hashes each mode
with its own bucket/sign pair, and flattens the m_1 x ... x m_N result with
mode 1 varying fastest. All indices are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .hashcore import SignFamily, TwoWiseFamily, derive_seed, sign_new, twowise_new


def flat_index(indices: Sequence[int], dims: Sequence[int]) -> int:
    """Column-major flat index: i_1 + i_2 d_1 + i_3 d_1 d_2 + ..."""
    if len(indices) != len(dims):
        raise ValueError("indices and dims differ in length")
    j = 0
    stride = 1
    for i, dk in zip(indices, dims):
        if not 0 <= i < dk:
            raise IndexError(f"mode index {i} outside [0, {dk})")
        j += i * stride
        stride *= dk
    return j


def unflat_index(j: int, dims: Sequence[int]) -> tuple[int, ...]:
    """Inverse of :func:`flat_index`."""
    total = math.prod(dims)
    if not 0 <= j < total:
        raise IndexError(f"flat index {j} outside [0, {total})")
    out = []
    for dk in dims:
        j, i = divmod(j, dk)
        out.append(i)
    return tuple(out)


def _iroot(d: int, n: int) -> int:
    """floor(d ** (1/n)) computed exactly."""
    r = int(round(d ** (1.0 / n)))
    while r**n > d:
        r -= 1
    while (r + 1) ** n <= d:
        r += 1
    return r


def tensorize(d: int, order: int) -> tuple[tuple[int, ...], int]:
    """Near-equal mode sizes whose product is the smallest such value >= d.

    Returns ``(mode_d, padded_d)``; all modes differ by at most one.
    """
    if d < 1 or order < 1:
        raise ValueError("d and order must be >= 1")
    modes = [_iroot(d, order)] * order
    k = 0
    while math.prod(modes) < d:
        modes[k] += 1
        k += 1
    return tuple(modes), math.prod(modes)


def factor_modes(m: int, order: int) -> tuple[int, ...]:
    """Split m into ``order`` integer factors, each as close to m^(1/order) as
    divisibility allows. The product is exactly m."""
    if m < 1 or order < 1:
        raise ValueError("m and order must be >= 1")
    out = []
    rest = m
    for left in range(order, 1, -1):
        target = rest ** (1.0 / left)
        divisors = [q for q in range(1, rest + 1) if rest % q == 0]
        q = min(divisors, key=lambda v: (abs(v - target), v))
        out.append(q)
        rest //= q
    out.append(rest)
    return tuple(sorted(out))


@dataclass(frozen=True)
class CsPlan:
    d: int
    m: int
    bucket: TwoWiseFamily
    sign: SignFamily
    h_table: np.ndarray = field(init=False, repr=False, compare=False)
    s_table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.bucket.domain != self.d or self.sign.domain != self.d:
            raise ValueError("bucket/sign domain must equal d")
        if self.bucket.range != self.m:
            raise ValueError("bucket range must equal m")
        h = self.bucket.table()
        s = self.sign.table()
        h.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "h_table", h)
        object.__setattr__(self, "s_table", s)


@dataclass(frozen=True)
class HcsPlan:
    d: int
    mode_d: tuple[int, ...]
    mode_m: tuple[int, ...]
    buckets: tuple[TwoWiseFamily, ...]
    signs: tuple[SignFamily, ...]
    H: np.ndarray = field(init=False, repr=False, compare=False)
    S: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        order = len(self.mode_d)
        if order < 1 or len(self.mode_m) != order:
            raise ValueError("mode_d and mode_m must have the same nonzero length")
        if len(self.buckets) != order or len(self.signs) != order:
            raise ValueError("need one bucket and one sign family per mode")
        for k in range(order):
            if self.buckets[k].domain != self.mode_d[k] or self.signs[k].domain != self.mode_d[k]:
                raise ValueError(f"mode {k} families do not match mode size {self.mode_d[k]}")
            if self.buckets[k].range != self.mode_m[k]:
                raise ValueError(f"mode {k} bucket range must equal {self.mode_m[k]}")
        if self.padded_d < self.d:
            raise ValueError("mode sizes do not cover d")
        H, S = _kernels.stack_modes(
            [f.table() for f in self.buckets], [f.table() for f in self.signs]
        )
        H.setflags(write=False)
        S.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "_mode_d_arr", np.asarray(self.mode_d, dtype=np.int64))
        object.__setattr__(self, "_mode_m_arr", np.asarray(self.mode_m, dtype=np.int64))

    @property
    def order(self) -> int:
        return len(self.mode_d)

    @property
    def padded_d(self) -> int:
        return math.prod(self.mode_d)

    @property
    def m(self) -> int:
        return math.prod(self.mode_m)

    def mode_tables(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.H[k, :dk], self.S[k, :dk]) for k, dk in enumerate(self.mode_d)]


# Sketch plans hash scrambled index keys; see TwoWiseFamily for why.
SCRAMBLE_INDICES = True


def make_cs_plan(seed: int, d: int, m: int, prefix: str = "cs") -> CsPlan:
    bucket = twowise_new(
        derive_seed(seed, f"{prefix}/mode0/bucket"), d, m, scrambled=SCRAMBLE_INDICES
    )
    sign = sign_new(derive_seed(seed, f"{prefix}/mode0/sign"), d, scrambled=SCRAMBLE_INDICES)
    return CsPlan(d=d, m=m, bucket=bucket, sign=sign)


def make_hcs_plan(
    seed: int,
    d: int,
    order: int,
    m: int | None = None,
    mode_m: Sequence[int] | None = None,
    prefix: str = "hcs",
) -> HcsPlan:
    """Draw an HCS plan; give either the total sketch size ``m`` or ``mode_m``."""
    mode_d, _ = tensorize(d, order)
    if mode_m is None:
        if m is None:
            raise ValueError("give m or mode_m")
        mode_m = factor_modes(m, order)
    mode_m = tuple(int(v) for v in mode_m)
    if len(mode_m) != order:
        raise ValueError(f"mode_m has {len(mode_m)} entries, expected {order}")
    if m is not None and math.prod(mode_m) != m:
        raise ValueError(f"prod(mode_m)={math.prod(mode_m)} != m={m}")
    buckets = tuple(
        twowise_new(
            derive_seed(seed, f"{prefix}/mode{k}/bucket"),
            mode_d[k],
            mode_m[k],
            scrambled=SCRAMBLE_INDICES,
        )
        for k in range(order)
    )
    signs = tuple(
        sign_new(derive_seed(seed, f"{prefix}/mode{k}/sign"), mode_d[k], scrambled=SCRAMBLE_INDICES)
        for k in range(order)
    )
    return HcsPlan(d=d, mode_d=mode_d, mode_m=mode_m, buckets=buckets, signs=signs)


def _as_rows(p) -> tuple[np.ndarray, bool]:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError(f"expected a vector or a 2-d batch, got shape {arr.shape}")


def cs_apply(plan: CsPlan, p) -> np.ndarray:
    """Count sketch of a vector (or of each row of a 2-d batch)."""
    X, single = _as_rows(p)
    if X.shape[1] != plan.d:
        raise ValueError(f"input length {X.shape[1]} != plan dimension {plan.d}")
    out = _kernels.cs_batch(X, plan.h_table, plan.s_table, plan.m)
    return out[0] if single else out


def hcs_apply(plan: HcsPlan, p) -> np.ndarray:
    """Flattened higher-order count sketch; inputs shorter than
    ``plan.padded_d`` are treated as zero-padded."""
    X, single = _as_rows(p)
    if X.shape[1] > plan.padded_d:
        raise ValueError(f"input length {X.shape[1]} exceeds padded dimension {plan.padded_d}")
    out = _kernels.hcs_batch(X, plan.H, plan.S, plan._mode_d_arr, plan._mode_m_arr)
    return out[0] if single else out
