"""The six LSH families.

Euclidean schemes (E2LSH, CS-E2LSH, HCS-E2LSH) emit signed integer codes
floor((x_l + b_l) / w), where x is a Gaussian projection (E2LSH) or sqrt(m)
times a count sketch / flattened higher-order count sketch. Cosine schemes
(SRP, CS-SRP, HCS-SRP) emit one bit per coordinate: 1 if x_l > 0, else 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .hashcore import (
    GaussianMatrixSpec,
    OffsetVector,
    derive_seed,
    gaussian_rows,
    uniform_offsets,
)
from .sketch import CsPlan, HcsPlan, cs_apply, hcs_apply, make_cs_plan, make_hcs_plan

DEFAULT_W = 4.0

# Codes are serialized as int64; stay well clear of the boundary.
_CODE_LIMIT = float(2**62)


class SchemeKind(str, enum.Enum):
    E2LSH = "e2lsh"
    CS_E2LSH = "cs-e2lsh"
    HCS_E2LSH = "hcs-e2lsh"
    SRP = "srp"
    CS_SRP = "cs-srp"
    HCS_SRP = "hcs-srp"

    @property
    def metric(self) -> str:
        return "euclidean" if self.value.endswith("e2lsh") else "cosine"

    @property
    def projection(self) -> str:
        if self.value.startswith("hcs-"):
            return "hcs"
        if self.value.startswith("cs-"):
            return "cs"
        return "gaussian"

    @classmethod
    def parse(cls, name: "str | SchemeKind") -> "SchemeKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown scheme {name!r}; expected one of {valid}") from None


EUCLIDEAN_KINDS = (SchemeKind.E2LSH, SchemeKind.CS_E2LSH, SchemeKind.HCS_E2LSH)
COSINE_KINDS = (SchemeKind.SRP, SchemeKind.CS_SRP, SchemeKind.HCS_SRP)

Projection = Union[GaussianMatrixSpec, CsPlan, HcsPlan]


@dataclass(frozen=True)
class FamilyInstance:
    kind: SchemeKind
    d: int
    m: int
    projection: Projection = field(repr=False)
    w: float | None = None
    offsets: OffsetVector | None = field(default=None, repr=False)
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        expected = {"gaussian": GaussianMatrixSpec, "cs": CsPlan, "hcs": HcsPlan}[
            self.kind.projection
        ]
        if not isinstance(self.projection, expected):
            raise TypeError(f"{self.kind.value} needs a {expected.__name__} projection")
        if self.kind.metric == "euclidean":
            if self.w is None or self.offsets is None:
                raise ValueError("Euclidean schemes need w and offsets")
            if len(self.offsets.values) != self.m:
                raise ValueError("offset count must equal m")
        elif self.offsets is not None:
            raise ValueError("cosine schemes take no offsets")

    def project(self, X) -> np.ndarray:
        """Real-valued projections before discretization, shape (n, m).

        For CS/HCS schemes this is the raw sketch (no sqrt(m) factor).
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("project expects a 2-d batch")
        proj = self.projection
        if isinstance(proj, GaussianMatrixSpec):
            if X.shape[1] != self.d:
                raise ValueError(f"input length {X.shape[1]} != family dimension {self.d}")
            return X @ proj.values.T
        if isinstance(proj, CsPlan):
            return cs_apply(proj, X)
        if X.shape[1] != self.d:
            raise ValueError(f"input length {X.shape[1]} != family dimension {self.d}")
        return hcs_apply(proj, X)

    def hash_batch(self, X) -> np.ndarray:
        """Hash every row of X: int64 codes (Euclidean) or uint8 bits (cosine)."""
        proj = self.project(X)
        if self.kind.metric == "cosine":
            return (proj > 0).astype(np.uint8)
        if self.kind.projection != "gaussian":
            proj = proj * math.sqrt(self.m)
        return discretize_array(proj, self.offsets.values, self.w)

    def hash(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        if p.ndim != 1:
            raise ValueError("hash expects a single vector")
        return self.hash_batch(p[None, :])[0]

    __call__ = hash


def discretize(x: float, b: float, w: float) -> int:
    """floor((x + b) / w), rounding toward -inf."""
    if not w > 0:
        raise ValueError("w must be positive")
    return math.floor((x + b) / w)


def discretize_array(x: np.ndarray, b: np.ndarray, w: float) -> np.ndarray:
    v = np.floor((x + b) / w)
    if not np.all(np.abs(v) < _CODE_LIMIT):
        raise OverflowError("hash code coordinate outside the 64-bit key range")
    return v.astype(np.int64)


def make_family(
    kind: "SchemeKind | str",
    d: int,
    m: int,
    seed: int,
    *,
    w: float = DEFAULT_W,
    order: int = 2,
    prefix: str = "table0",
    mode_m: tuple[int, ...] | None = None,
) -> FamilyInstance:
    """Draw one m-code family of the given kind, deterministically from seed.

    ``order`` and ``mode_m`` only matter for HCS kinds.
    """
    kind = SchemeKind.parse(kind)
    if d < 1 or m < 1:
        raise ValueError("d and m must be >= 1")
    labels: list[str] = []
    if kind.projection == "gaussian":
        label = f"{prefix}/gauss"
        projection = gaussian_rows(derive_seed(seed, label), m, d)
        labels.append(label)
    elif kind.projection == "cs":
        projection = make_cs_plan(seed, d, m, prefix=prefix)
        labels += [f"{prefix}/mode0/bucket", f"{prefix}/mode0/sign"]
    else:
        projection = make_hcs_plan(seed, d, order, m=m, mode_m=mode_m, prefix=prefix)
        for k in range(order):
            labels += [f"{prefix}/mode{k}/bucket", f"{prefix}/mode{k}/sign"]
    offsets = None
    width = None
    if kind.metric == "euclidean":
        if not w > 0:
            raise ValueError(f"bucket width must be positive, got {w}")
        label = f"{prefix}/offsets"
        offsets = uniform_offsets(derive_seed(seed, label), m, w)
        width = float(w)
        labels.append(label)
    return FamilyInstance(
        kind=kind,
        d=d,
        m=m,
        projection=projection,
        w=width,
        offsets=offsets,
        labels=tuple(labels),
    )


def _require(fam: FamilyInstance, kind: SchemeKind) -> None:
    if fam.kind is not kind:
        raise ValueError(f"family is {fam.kind.value}, expected {kind.value}")


def e2lsh_hash(fam: FamilyInstance, p) -> np.ndarray:
    _require(fam, SchemeKind.E2LSH)
    return fam.hash(p)


def srp_hash(fam: FamilyInstance, p) -> np.ndarray:
    _require(fam, SchemeKind.SRP)
    return fam.hash(p)


def cs_e2lsh_hash(fam: FamilyInstance, p) -> np.ndarray:
    _require(fam, SchemeKind.CS_E2LSH)
    return fam.hash(p)


def hcs_e2lsh_hash(fam: FamilyInstance, p) -> np.ndarray:
    _require(fam, SchemeKind.HCS_E2LSH)
    return fam.hash(p)


def cs_srp_hash(fam: FamilyInstance, p) -> np.ndarray:
    _require(fam, SchemeKind.CS_SRP)
    return fam.hash(p)


def hcs_srp_hash(fam: FamilyInstance, p) -> np.ndarray:
    _require(fam, SchemeKind.HCS_SRP)
    return fam.hash(p)
