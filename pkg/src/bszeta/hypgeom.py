"""Hyperbolic plane geometry in the Poincare disk model.

Group elements act on the disk through SU(1,1)-type matrices.  Half-plane
data (SL_2(R) matrices, points with positive imaginary part) is moved to the
disk by the Cayley map ``w -> (w - i)/(w + i)`` on ingest.
"""
from __future__ import annotations

import enum
import math

import mpmath
import numpy as np

from .numcore import GroupElement, PrecScalar, PrecisionExhausted

__all__ = [
    "HPoint",
    "ElementType",
    "NotHyperbolic",
    "Indeterminate",
    "cayley_matrix",
    "mobius_act",
    "hyp_dist",
    "classify_element",
    "translation_length",
    "displacement",
    "cosh_dist_np",
    "act_np",
]


class NotHyperbolic(ValueError):
    pass


class Indeterminate(ArithmeticError):
    """|trace| - 2 is below the error resolution; raise the precision."""


class ElementType(str, enum.Enum):
    IDENTITY = "identity"
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    HYPERBOLIC = "hyperbolic"


class HPoint:
    """A point of the Poincare disk, |z| < 1 with margin above its radius."""

    __slots__ = ("z",)

    def __init__(self, z):
        z = z if isinstance(z, PrecScalar) else PrecScalar.exact(mpmath.mpc(z))
        if not float(abs(z.value)) + z.err < 1:
            raise PrecisionExhausted("point not provably inside the unit disk")
        self.z = z

    @classmethod
    def from_halfplane(cls, w) -> "HPoint":
        w = w if isinstance(w, PrecScalar) else PrecScalar.exact(mpmath.mpc(w))
        if not float(mpmath.im(w.value)) > w.err:
            raise ValueError("half-plane point must have positive imaginary part")
        i = PrecScalar.exact(mpmath.mpc(0, 1))
        return cls((w - i) / (w + i))

    def to_halfplane(self) -> complex:
        z = self.z.value
        return complex(1j * (1 + z) / (1 - z))

    def __complex__(self) -> complex:
        return complex(self.z.value)

    def __repr__(self) -> str:
        return f"HPoint({mpmath.nstr(self.z.value, 15)})"


def cayley_matrix(a, b, c, d, word=None) -> GroupElement:
    """Conjugate a half-plane matrix ``[[a, b], [c, d]]`` into the disk model."""
    i = mpmath.mpc(0, 1)
    m = [mpmath.mpmathify(x) for x in (a, b, c, d)]
    # C M C^{-1} with C = [[1, -i], [1, i]], C^{-1} = (1/2i) [[i, i], [-1, 1]]
    a_, b_, c_, d_ = m
    p = [a_ - i * c_, b_ - i * d_, a_ + i * c_, b_ + i * d_]  # C M
    inv = [i / (2 * i), i / (2 * i), -1 / (2 * i), 1 / (2 * i)]
    vals = [
        p[0] * inv[0] + p[1] * inv[2],
        p[0] * inv[1] + p[1] * inv[3],
        p[2] * inv[0] + p[3] * inv[2],
        p[2] * inv[1] + p[3] * inv[3],
    ]
    return GroupElement.from_scalars([PrecScalar.exact(v) for v in vals], word)


def mobius_act(g: GroupElement, z: HPoint) -> HPoint:
    a, b, c, d = g.entries
    return HPoint((a * z.z + b) / (c * z.z + d))


def _cosh_dist(z1: PrecScalar, z2: PrecScalar):
    diff = z1.value - z2.value
    n1 = 1 - abs(z1.value) ** 2
    n2 = 1 - abs(z2.value) ** 2
    return 1 + 2 * abs(diff) ** 2 / (n1 * n2)


def hyp_dist(z1: HPoint, z2: HPoint) -> float:
    ch = _cosh_dist(z1.z, z2.z)
    if ch <= 1:
        return 0.0
    # 2 asinh(|z1 - z2| / sqrt((1-|z1|^2)(1-|z2|^2))) is stable for tiny distances
    diff = abs(z1.z.value - z2.z.value)
    n = mpmath.sqrt((1 - abs(z1.z.value) ** 2) * (1 - abs(z2.z.value) ** 2))
    return float(2 * mpmath.asinh(diff / n))


def classify_element(g: GroupElement) -> ElementType:
    tr = g.trace()
    t = abs(mpmath.re(tr.value))
    err = tr.err
    gap = t - 2
    if gap > err:
        return ElementType.HYPERBOLIC
    if gap < -err:
        return ElementType.ELLIPTIC
    # |tr| = 2 within resolution: identity if the matrix is +-I, else parabolic when exact
    a, b, c, d = g.vals
    ea, eb, ec, ed = g.errs
    if (abs(b) <= eb and abs(c) <= ec and abs(a - d) <= ea + ed
            and abs(abs(a) - 1) <= ea):
        return ElementType.IDENTITY
    if max(g.errs) == 0 and gap == 0:
        # exact entries with |tr| = 2 and not +-I
        return ElementType.PARABOLIC
    raise Indeterminate(f"| |tr| - 2 | = {float(abs(gap)):.3g} below error radius {err:.3g}")


def translation_length(g: GroupElement) -> float:
    kind = classify_element(g)
    if kind is not ElementType.HYPERBOLIC:
        raise NotHyperbolic(f"element is {kind.value}")
    t = abs(mpmath.re(g.vals[0] + g.vals[3]))
    return float(2 * mpmath.acosh(t / 2))


def displacement(g: GroupElement, z: HPoint) -> float:
    return hyp_dist(z, mobius_act(g, z))


# float64 vectorized helpers for Monte Carlo work


def act_np(mats: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Apply each matrix in ``mats`` (shape (k, 2, 2)) to each point in ``z``.

    Returns shape (len(z), k).
    """
    z = np.asarray(z, dtype=complex)[:, None]
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    return (a * z + b) / (c * z + d)


def cosh_dist_np(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    num = 2 * np.abs(z1 - z2) ** 2
    return 1 + num / ((1 - np.abs(z1) ** 2) * (1 - np.abs(z2) ** 2))
