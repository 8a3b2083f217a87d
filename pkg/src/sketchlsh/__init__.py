"""Count-sketch and higher-order-count-sketch locality-sensitive hashing."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .families import (
    COSINE_KINDS,
    EUCLIDEAN_KINDS,
    FamilyInstance,
    SchemeKind,
    make_family,
)
from .index import IndexConfig, LshIndex, QueryResult, build
from .sketch import cs_apply, hcs_apply, make_cs_plan, make_hcs_plan, tensorize

__all__ = [
    "BACKEND",
    "COSINE_KINDS",
    "EUCLIDEAN_KINDS",
    "FamilyInstance",
    "IndexConfig",
    "LshIndex",
    "QueryResult",
    "SchemeKind",
    "build",
    "cs_apply",
    "hcs_apply",
    "make_cs_plan",
    "make_family",
    "make_hcs_plan",
    "tensorize",
]
