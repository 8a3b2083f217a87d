"""Seeded randomness: 2-wise independent hash families, Gaussian rows, offsets.

Everything downstream is a pure function of one 64-bit master seed. Substream
seeds are split off with :func:`derive_seed` using string labels such as
``"table3/mode1/bucket"``, so adding a table never perturbs the earlier ones.

Normal variates come from numpy's PCG64 generator (ziggurat sampler).
"""

from __future__ import annotations

import functools
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

MERSENNE_61 = _kernels.MERSENNE_61
MASK64 = (1 << 64) - 1


def derive_seed(master: int, label: str) -> int:
    """Split a label-specific 64-bit seed off ``master``."""
    if not label:
        raise ValueError("seed label must be nonempty")
    payload = (int(master) & MASK64).to_bytes(8, "little") + label.encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


def _splitmix64(i: int) -> int:
    z = (i + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def scrambled_key(i: int) -> int:
    """Fixed pseudo-random field element standing in for index i."""
    return _splitmix64(i) % MERSENNE_61


@functools.lru_cache(maxsize=64)
def scrambled_keys(domain: int) -> np.ndarray:
    """``scrambled_key(i)`` for i < domain, checked to be pairwise distinct."""
    keys = _kernels.splitmix_keys(domain)
    if np.unique(keys).size != domain:
        raise ValueError(f"scrambled keys collide below {domain}")
    keys.setflags(write=False)
    return keys


def _plain_keys(domain: int) -> np.ndarray:
    return np.arange(1, domain + 1, dtype=np.uint64)


@dataclass(frozen=True)
class TwoWiseFamily:
    """h(i) = ((a x_i + b) mod p) mod m over p = 2^61 - 1.

    By default x_i = i + 1. With ``scrambled=True`` x_i is a fixed
    pseudo-random relabeling of i (:func:`scrambled_key`). Any injective
    relabeling keeps the family 2-wise independent. On short runs of
    consecutive indices it also stops the low residues from following the
    near-arithmetic progression a, 2a, 3a, ... mod p. That progression
    leaves whole buckets empty for a few percent of draws when the domain
    is only tens of indices.
    """

    a: int
    b: int
    domain: int
    range: int
    scrambled: bool = False

    def __post_init__(self):
        if not 1 <= self.a < MERSENNE_61:
            raise ValueError(f"coefficient a={self.a} outside [1, p-1]")
        if not 0 <= self.b < MERSENNE_61:
            raise ValueError(f"coefficient b={self.b} outside [0, p-1]")
        if self.domain < 1:
            raise ValueError("domain must be >= 1")
        if not 1 <= self.range < MERSENNE_61:
            raise ValueError(f"range {self.range} outside [1, p-1]")

    def __call__(self, i: int) -> int:
        return twowise_eval(self, i)

    def table(self) -> np.ndarray:
        """All ``domain`` evaluations as an int64 array."""
        keys = scrambled_keys(self.domain) if self.scrambled else _plain_keys(self.domain)
        return _kernels.twowise_table(self.a, self.b, self.range, keys)


@dataclass(frozen=True)
class SignFamily:
    """Random signs from a range-2 family: parity 0 -> +1, parity 1 -> -1."""

    base: TwoWiseFamily

    def __post_init__(self):
        if self.base.range != 2:
            raise ValueError("sign family needs a base family with range 2")

    @property
    def domain(self) -> int:
        return self.base.domain

    def __call__(self, i: int) -> int:
        return sign_eval(self, i)

    def table(self) -> np.ndarray:
        return 1.0 - 2.0 * self.base.table().astype(np.float64)


def twowise_new(seed: int, domain: int, range: int, *, scrambled: bool = False) -> TwoWiseFamily:
    if domain < 1:
        raise ValueError("domain must be >= 1")
    if not 1 <= range < MERSENNE_61:
        raise ValueError(f"range {range} must lie in [1, 2^61 - 2]")
    rng = rng_for(seed)
    a = int(rng.integers(1, MERSENNE_61))
    b = int(rng.integers(0, MERSENNE_61))
    return TwoWiseFamily(a=a, b=b, domain=domain, range=range, scrambled=scrambled)


def sign_new(seed: int, domain: int, *, scrambled: bool = False) -> SignFamily:
    return SignFamily(twowise_new(seed, domain, 2, scrambled=scrambled))


def twowise_eval(f: TwoWiseFamily, i: int) -> int:
    if not 0 <= i < f.domain:
        raise IndexError(f"index {i} outside domain [0, {f.domain})")
    x = scrambled_key(i) if f.scrambled else i + 1
    return ((f.a * x + f.b) % MERSENNE_61) % f.range


def sign_eval(f: SignFamily, i: int) -> int:
    return 1 - 2 * twowise_eval(f.base, i)


@dataclass(frozen=True)
class GaussianMatrixSpec:
    seed: int
    rows: int
    cols: int
    values: np.ndarray = field(repr=False, compare=False)


def gaussian_rows(seed: int, m: int, d: int) -> GaussianMatrixSpec:
    """m x d i.i.d. standard normals from ``seed``."""
    if m < 1 or d < 1:
        raise ValueError("m and d must be >= 1")
    values = rng_for(seed).standard_normal((m, d))
    values.setflags(write=False)
    return GaussianMatrixSpec(seed=seed, rows=m, cols=d, values=values)


@dataclass(frozen=True)
class OffsetVector:
    values: np.ndarray = field(repr=False, compare=False)
    w: float


def uniform_offsets(seed: int, m: int, w: float) -> OffsetVector:
    """m offsets uniform on the half-open interval [0, w)."""
    if not w > 0:
        raise ValueError(f"bucket width must be positive, got {w}")
    if m < 1:
        raise ValueError("m must be >= 1")
    values = rng_for(seed).random(m) * w
    # x * w can round up to w when x is the largest double below 1
    values = np.minimum(values, np.nextafter(w, 0.0))
    values.setflags(write=False)
    return OffsetVector(values=values, w=float(w))
