"""Collision-probability models for the Euclidean and cosine families."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .families import SchemeKind

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def half_normal_pdf(x: float) -> float:
    """Density of |Z| for Z ~ N(0, 1), x >= 0."""
    return math.sqrt(2.0 / math.pi) * math.exp(-0.5 * x * x)


def p_collision_e2lsh(R: float, w: float) -> float:
    """Single-coordinate collision probability at distance R, bucket width w.

    Closed form of the integral over [0, w] of (1/R) f(t/R) (1 - t/w) dt with
    f the half-normal density.
    """
    if not R > 0:
        raise ValueError(f"distance must be positive, got {R}")
    if not w > 0:
        raise ValueError(f"bucket width must be positive, got {w}")
    r = w / R
    return 1.0 - 2.0 * _norm_cdf(-r) - (2.0 / (_SQRT_2PI * r)) * (-math.expm1(-0.5 * r * r))


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature of f on [a, b] to absolute tolerance tol."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2, depth - 1
        )

    fa, fb = f(a), f(b)
    fm = f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def p_collision_e2lsh_quadrature(R: float, w: float, tol: float = 1e-10) -> float:
    """Same probability as :func:`p_collision_e2lsh`, by direct quadrature."""
    if not R > 0 or not w > 0:
        raise ValueError("R and w must be positive")

    def integrand(t):
        return half_normal_pdf(t / R) / R * (1.0 - t / w)

    # split at a few multiples of R so narrow peaks are not skipped
    cuts = sorted({0.0, w, *(c * R for c in (1.0, 4.0, 10.0) if c * R < w)})
    return sum(adaptive_simpson(integrand, lo, hi, tol) for lo, hi in zip(cuts, cuts[1:]))


def p_collision_srp(theta: float) -> float:
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"angle {theta} outside [0, pi]")
    return 1.0 - theta / math.pi


def angle_between(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("angle undefined for a zero vector")
    # 2 atan2(|a - b|, |a + b|) equals arccos(<a, b>) for unit a, b but
    # stays accurate near 0 and pi, where arccos of a rounded cosine does not.
    a = u / nu
    b = v / nv
    return 2.0 * math.atan2(float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b)))


@dataclass(frozen=True)
class SensitivityTuple:
    """(R1, R2, P1^m, P2^m) guarantee of an m-coordinate family.

    For cosine kinds R1/R2 hold the angles theta1 < theta2.
    """

    kind: SchemeKind
    R1: float
    R2: float
    P1: float
    P2: float
    m: int

    @property
    def P1_family(self) -> float:
        return self.P1**self.m

    @property
    def P2_family(self) -> float:
        return self.P2**self.m


def sensitivity(kind, R1: float, R2: float, m: int, w: float = 4.0) -> SensitivityTuple:
    """Sensitivity tuple for a kind; R1 < R2 are distances (Euclidean) or
    angles in radians (cosine)."""
    kind = SchemeKind.parse(kind)
    if m < 1:
        raise ValueError("m must be >= 1")
    if not R1 < R2:
        raise ValueError("need R1 < R2")
    if kind.metric == "euclidean":
        P1, P2 = p_collision_e2lsh(R1, w), p_collision_e2lsh(R2, w)
    else:
        P1, P2 = p_collision_srp(R1), p_collision_srp(R2)
    return SensitivityTuple(kind=kind, R1=R1, R2=R2, P1=P1, P2=P2, m=m)


def theoretical_collision(kind, u, v, w: float = 4.0) -> float:
    """Single-coordinate collision probability of kind for the pair (u, v)."""
    kind = SchemeKind.parse(kind)
    if kind.metric == "cosine":
        return p_collision_srp(angle_between(u, v))
    R = float(np.linalg.norm(np.asarray(u, float) - np.asarray(v, float)))
    return 1.0 if R == 0 else p_collision_e2lsh(R, w)
