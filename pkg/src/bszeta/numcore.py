"""Precision-tracked scalars and 2x2 matrices for discrete-group enumeration.

Every scalar carries an absolute error radius next to its mpmath value, and
matrix products propagate those radii conservatively.  Group elements are
stored up to sign (PSL_2) in a canonical form, and deduplication goes through a
quantized index whose soundness is audited with :func:`audit_separation`.
"""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import mpmath
import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "NumConfig",
    "CONFIG",
    "configure",
    "working_precision",
    "PrecisionExhausted",
    "SeparationViolation",
    "PrecScalar",
    "GroupElement",
    "mat_mul",
    "mat_inv",
    "dedup_key",
    "DedupIndex",
    "entry_distance",
    "audit_separation",
]


class PrecisionExhausted(ArithmeticError):
    """Error radius grew past what the dedup tolerance can absorb."""


class SeparationViolation(RuntimeError):
    """Two distinct elements are closer than the dedup tolerance allows."""


@dataclass
class NumConfig:
    precision_bits: int = 128
    dedup_tol: float = 1e-12


CONFIG = NumConfig()
mpmath.mp.prec = CONFIG.precision_bits


def configure(precision_bits: int | None = None, dedup_tol: float | None = None) -> NumConfig:
    if precision_bits is not None:
        if precision_bits < 53:
            raise ValueError("precision_bits must be at least 53")
        CONFIG.precision_bits = int(precision_bits)
        mpmath.mp.prec = CONFIG.precision_bits
    if dedup_tol is not None:
        if not dedup_tol > 0:
            raise ValueError("dedup_tol must be positive")
        CONFIG.dedup_tol = float(dedup_tol)
    return CONFIG


@contextlib.contextmanager
def working_precision(precision_bits: int | None = None, dedup_tol: float | None = None):
    old = (CONFIG.precision_bits, CONFIG.dedup_tol)
    configure(precision_bits, dedup_tol)
    try:
        yield CONFIG
    finally:
        configure(*old)


def _unit_roundoff() -> float:
    # one ulp at the working precision, with a safety factor of 2
    return 2.0 ** (2 - CONFIG.precision_bits)


def _mag(x) -> float:
    """Upper bound on |x| as a float."""
    return float(abs(x)) * (1 + 1e-15) + 1e-300


class PrecScalar:
    """A real or complex mpmath number with an absolute error radius."""

    __slots__ = ("value", "err")

    def __init__(self, value, err: float = 0.0):
        if not (err >= 0 and math.isfinite(err)):
            raise ValueError(f"error radius must be finite and nonnegative, got {err!r}")
        self.value = value
        self.err = float(err)

    @classmethod
    def from_decimal(cls, text: str, imag: str | None = None) -> "PrecScalar":
        """Parse decimal strings; the radius covers the last printed digit."""
        re_v, re_e = _parse_decimal(text)
        if imag is None:
            return cls(re_v, re_e)
        im_v, im_e = _parse_decimal(imag)
        return cls(mpmath.mpc(re_v, im_v), math.hypot(re_e, im_e) * (1 + 1e-15))

    @classmethod
    def exact(cls, value) -> "PrecScalar":
        v = mpmath.mpmathify(value)
        # conversion itself rounds to working precision
        return cls(v, _mag(v) * _unit_roundoff() if v != 0 else 0.0)

    def __repr__(self) -> str:
        return f"PrecScalar({mpmath.nstr(self.value, 20)} ± {self.err:.3g})"

    def _coerce(self, other) -> "PrecScalar":
        return other if isinstance(other, PrecScalar) else PrecScalar.exact(other)

    def __add__(self, other):
        o = self._coerce(other)
        v = self.value + o.value
        return PrecScalar(v, (self.err + o.err + _mag(v) * _unit_roundoff()) * (1 + 1e-15))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        v = self.value - o.value
        return PrecScalar(v, (self.err + o.err + _mag(v) * _unit_roundoff()) * (1 + 1e-15))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return PrecScalar(-self.value, self.err)

    def __mul__(self, other):
        o = self._coerce(other)
        v = self.value * o.value
        e = _mag(self.value) * o.err + _mag(o.value) * self.err + self.err * o.err
        return PrecScalar(v, (e + _mag(v) * _unit_roundoff()) * (1 + 1e-15))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        lo = float(abs(o.value)) - o.err
        if lo <= 0:
            raise PrecisionExhausted("division by a quantity not provably nonzero")
        v = self.value / o.value
        e = (self.err + _mag(v) * o.err) / lo
        return PrecScalar(v, (e + _mag(v) * _unit_roundoff()) * (1 + 1e-15))

    def __abs__(self):
        return PrecScalar(abs(self.value), self.err)

    def upper(self) -> float:
        return _mag(self.value) + self.err

    def provably_positive(self) -> bool:
        return float(mpmath.re(self.value)) > self.err

    def __float__(self) -> float:
        return float(mpmath.re(self.value))


def _parse_decimal(text: str):
    text = text.strip()
    v = mpmath.mpf(text)
    mant = text.lower().split("e")[0]
    exp = int(text.lower().split("e")[1]) if "e" in text.lower() else 0
    decimals = len(mant.split(".")[1]) if "." in mant else 0
    if "." not in mant and "e" not in text.lower():
        digit_err = 0.0  # integer literals are exact
    else:
        digit_err = 0.5 * 10.0 ** (exp - decimals) if decimals - exp < 300 else 0.0
    return v, digit_err + _mag(v) * _unit_roundoff()


def _components(vals) -> list:
    out = []
    for v in vals:
        out.append(mpmath.re(v))
        out.append(mpmath.im(v))
    return out


class GroupElement:
    """A unit-determinant 2x2 matrix modulo sign, in canonical form.

    ``entries`` are ``(a, b, c, d)`` for the matrix ``[[a, b], [c, d]]``.
    ``word`` optionally records the generator word (signed 1-based indices).
    """

    __slots__ = ("vals", "errs", "word", "_np", "_comps")

    def __init__(self, vals: Sequence, errs: Sequence[float], word: tuple | None = None,
                 canonical: bool = False):
        vals = list(vals)
        errs = [float(e) for e in errs]
        if not canonical:
            vals = _canonical_sign(vals, errs)
        self.vals = tuple(vals)
        self.errs = tuple(errs)
        self.word = word
        self._np = None
        self._comps = None

    @classmethod
    def from_scalars(cls, entries: Sequence[PrecScalar], word=None) -> "GroupElement":
        return cls([e.value for e in entries], [e.err for e in entries], word)

    @classmethod
    def from_values(cls, a, b, c, d, word=None) -> "GroupElement":
        s = [PrecScalar.exact(x) for x in (a, b, c, d)]
        return cls.from_scalars(s, word)

    @classmethod
    def identity(cls) -> "GroupElement":
        one, zero = mpmath.mpf(1), mpmath.mpf(0)
        return cls([one, zero, zero, one], [0.0] * 4, word=())

    @property
    def entries(self) -> tuple:
        return tuple(PrecScalar(v, e) for v, e in zip(self.vals, self.errs))

    @property
    def err(self) -> float:
        return max(self.errs)

    def __repr__(self) -> str:
        a, b, c, d = (mpmath.nstr(v, 12) for v in self.vals)
        return f"GroupElement([[{a}, {b}], [{c}, {d}]], err={self.err:.2g}, word={self.word})"

    def det(self) -> PrecScalar:
        a, b, c, d = self.entries
        return a * d - b * c

    def trace(self) -> PrecScalar:
        a, _, _, d = self.entries
        return a + d

    def trace_abs(self) -> float:
        return abs(float(mpmath.re(self.vals[0] + self.vals[3])))

    def components(self) -> list:
        """Real and imaginary parts of the entries, row-major."""
        if self._comps is None:
            self._comps = _components(self.vals)
        return self._comps

    def as_array(self) -> np.ndarray:
        """Complex128 copy of the matrix (cached)."""
        if self._np is None:
            self._np = np.array([[complex(self.vals[0]), complex(self.vals[1])],
                                 [complex(self.vals[2]), complex(self.vals[3])]])
        return self._np

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return mat_mul(self, other)

    def inverse(self) -> "GroupElement":
        return mat_inv(self)

    def __neg__(self) -> "GroupElement":
        return GroupElement([-v for v in self.vals], self.errs, self.word, canonical=False)


def _canonical_sign(vals, errs):
    # first real/imag component whose magnitude provably exceeds its radius
    for v, e in zip(vals, errs):
        for part in (mpmath.re(v), mpmath.im(v)):
            if abs(part) > e:
                if part < 0:
                    return [-x for x in vals]
                return vals
    return vals


def _reduce_word(w: tuple) -> tuple:
    out: list = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def _check_tol(errs):
    if max(errs) > CONFIG.dedup_tol:
        raise PrecisionExhausted(
            f"error radius {max(errs):.3g} exceeds dedup tolerance {CONFIG.dedup_tol:.3g}; "
            "raise precision_bits"
        )


def mat_mul(x: GroupElement, y: GroupElement) -> GroupElement:
    a1, b1, c1, d1 = x.vals
    a2, b2, c2, d2 = y.vals
    ea1, eb1, ec1, ed1 = x.errs
    ea2, eb2, ec2, ed2 = y.errs
    ma1, mb1, mc1, md1 = (_mag(v) for v in x.vals)
    ma2, mb2, mc2, md2 = (_mag(v) for v in y.vals)
    vals = [a1 * a2 + b1 * c2, a1 * b2 + b1 * d2, c1 * a2 + d1 * c2, c1 * b2 + d1 * d2]
    u = _unit_roundoff()

    def e(m1, e1, m2, e2, m3, e3, m4, e4, res):
        # |x1 y1 + x2 y2| propagated, plus rounding of the products and the sum
        prop = m1 * e2 + m2 * e1 + e1 * e2 + m3 * e4 + m4 * e3 + e3 * e4
        return (prop + (m1 * m2 + m3 * m4 + _mag(res)) * u) * (1 + 1e-14)

    errs = [
        e(ma1, ea1, ma2, ea2, mb1, eb1, mc2, ec2, vals[0]),
        e(ma1, ea1, mb2, eb2, mb1, eb1, md2, ed2, vals[1]),
        e(mc1, ec1, ma2, ea2, md1, ed1, mc2, ec2, vals[2]),
        e(mc1, ec1, mb2, eb2, md1, ed1, md2, ed2, vals[3]),
    ]
    _check_tol(errs)
    word = None
    if x.word is not None and y.word is not None:
        word = _reduce_word(x.word + y.word)
    return GroupElement(vals, errs, word)


def mat_inv(x: GroupElement) -> GroupElement:
    """Adjugate inverse; exact for unit determinant up to the stored radii."""
    a, b, c, d = x.vals
    ea, eb, ec, ed = x.errs
    word = None if x.word is None else tuple(-w for w in reversed(x.word))
    return GroupElement([d, -b, -c, a], [ed, eb, ec, ea], word)


def entry_distance(x: GroupElement, y: GroupElement) -> float:
    """Max over the 8 real components of the canonical forms."""
    return max(float(abs(p - q)) for p, q in zip(x.components(), y.components()))


def dedup_key(x: GroupElement, tol: float | None = None) -> tuple:
    """Grid cell (pitch ``tol``) of the canonical components of ``x``."""
    tol = CONFIG.dedup_tol if tol is None else tol
    if x.err >= tol / 4:
        raise PrecisionExhausted(f"error radius {x.err:.3g} too large for tol {tol:.3g}")
    return tuple(int(mpmath.nint(c / tol)) for c in x.components())


class DedupIndex:
    """Finds a stored element within ``tol`` of a query, or nothing.

    Elements are hashed on a coarse grid of pitch ``pitch``; a query probes
    neighboring cells only in coordinates lying near a cell wall, so lookups
    are O(1) on discrete sets while never missing a match within ``tol``.
    """

    def __init__(self, tol: float | None = None, pitch: float = 1e-7):
        self.tol = CONFIG.dedup_tol if tol is None else tol
        if pitch <= 4 * self.tol:
            raise ValueError("pitch must be much larger than tol")
        self.pitch = pitch
        self._cells: dict[tuple, list[int]] = {}
        self.items: list[GroupElement] = []

    def __len__(self) -> int:
        return len(self.items)

    def _floats(self, x: GroupElement) -> list[float]:
        if x.err >= self.tol / 4:
            raise PrecisionExhausted(f"error radius {x.err:.3g} too large for tol {self.tol:.3g}")
        return [float(c) for c in x.components()]

    def _candidate_cells(self, comps: list[float]):
        margin = self.tol + 1e-13 * max(1.0, max(abs(c) for c in comps)) + 0.01 * self.pitch
        options = []
        for c in comps:
            q = c / self.pitch
            cell = math.floor(q)
            opts = [cell]
            if (q - cell) * self.pitch < margin:
                opts.append(cell - 1)
            elif (cell + 1 - q) * self.pitch < margin:
                opts.append(cell + 1)
            options.append(opts)
        cells = [()]
        for opts in options:
            cells = [cc + (o,) for cc in cells for o in opts]
        return cells

    def find(self, x: GroupElement) -> int | None:
        comps = self._floats(x)
        for cell in self._candidate_cells(comps):
            for idx in self._cells.get(cell, ()):
                y = self.items[idx]
                if entry_distance(x, y) <= self.tol + x.err + y.err:
                    return idx
        return None

    def add(self, x: GroupElement) -> tuple[int, bool]:
        """Insert unless a match exists; returns (index, inserted)."""
        hit = self.find(x)
        if hit is not None:
            return hit, False
        comps = self._floats(x)
        cell = tuple(math.floor(c / self.pitch) for c in comps)
        self._cells.setdefault(cell, []).append(len(self.items))
        self.items.append(x)
        return len(self.items) - 1, True


def audit_separation(elems: Iterable[GroupElement], tol: float | None = None) -> float:
    """Minimum pairwise entry distance; raises if it is not above 10*tol."""
    tol = CONFIG.dedup_tol if tol is None else tol
    elems = list(elems)
    if not elems:
        raise ValueError("audit_separation needs a nonempty set")
    if len(elems) == 1:
        return math.inf
    pts = np.array([[float(c) for c in e.components()] for e in elems])
    tree = cKDTree(pts)
    dist, _ = tree.query(pts, k=2, p=np.inf)
    sep = float(dist[:, 1].min())
    if not sep > 10 * tol:
        raise SeparationViolation(
            f"two enumerated elements are {sep:.3g} apart (<= 10*tol = {10 * tol:.3g})"
        )
    return sep
