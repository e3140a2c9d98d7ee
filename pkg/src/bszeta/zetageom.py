"""Geometric side: Selberg zeta log-derivative and its D_s transforms.

Every series here is a Dirichlet series ``sum_k a_k exp(-s b_k)`` with
positive weights.  For a length spectrum the exponents are the class lengths
and the weights are ``multiplicity * ell0 / (1 - exp(-ell))``: expanding the
Euler product over k >= 0 gives a geometric series in exp(-ell) per class.

``D_s psi(s) = -d/ds (psi(s) / s)`` acts on a Dirichlet series in closed form:

    D_s L(s)   = s^-2 sum a (s b + 1) e^{-s b}
    D_s^2 L(s) = s^-4 sum a (s^2 b^2 + 3 s b + 3) e^{-s b}

A ``shift`` evaluates the transforms of ``s -> L(s + shift)``; it only
rescales the weights by exp(-shift b).
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .fuchsian import LengthSpectrum

__all__ = [
    "DomainError",
    "UnfitError",
    "dirichlet_terms",
    "log_deriv",
    "normalized_log_deriv",
    "ds_log_deriv",
    "ds2_log_deriv",
    "zeta_partial",
    "tail_bound",
    "growth_constant",
    "lemma_check",
    "series_value",
    "series_ds",
    "series_ds2",
    "EVAL_GRID",
]

# real evaluation grid for convergence reports, plus one off-axis point
EVAL_GRID: tuple = (1.1, 1.25, 1.5, 2.0, 3.0, 1.5 + 1j)


class DomainError(ValueError):
    pass


class UnfitError(ValueError):
    pass


def _check_s(s) -> complex:
    s = complex(s)
    if not s.real > 1:
        raise DomainError(f"Re(s) = {s.real} must exceed 1")
    return s


def dirichlet_terms(spec: LengthSpectrum, shift: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """(weights, exponents) of the log-derivative series, ascending in ell."""
    ell0, _, ell, mult = spec.arrays()
    w = mult * ell0 / -np.expm1(-ell) if len(ell) else ell
    if shift:
        w = w * np.exp(-shift * ell)
    return w, ell


def _ksum(values: np.ndarray) -> complex:
    # Neumaier summation in fixed (ascending-ell) order
    total = 0j
    comp = 0j
    for v in values.tolist():
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
    return total + comp


def _out(z: complex, s):
    return z.real if isinstance(s, (int, float)) else z


def series_value(a: Sequence[float], b: Sequence[float], s) -> complex:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return _ksum(a * np.exp(-complex(s) * b))


def series_ds(a, b, s) -> complex:
    a, b, s = np.asarray(a, float), np.asarray(b, float), complex(s)
    return _ksum(a * (s * b + 1) * np.exp(-s * b)) / s ** 2


def series_ds2(a, b, s) -> complex:
    a, b, s = np.asarray(a, float), np.asarray(b, float), complex(s)
    sb = s * b
    return _ksum(a * (sb * sb + 3 * sb + 3) * np.exp(-sb)) / s ** 4


def log_deriv(spec: LengthSpectrum, s, shift: float = 0.0):
    """Z'/Z(s + shift) truncated at the spectrum cutoff."""
    _check_s(complex(s) + shift)
    a, b = dirichlet_terms(spec, shift)
    return _out(series_value(a, b, s), s)


def normalized_log_deriv(spec: LengthSpectrum, s):
    return log_deriv(spec, s) / spec.covolume


def ds_log_deriv(spec: LengthSpectrum, s, shift: float = 0.0):
    """-d/ds [ Z'/Z(s + shift) / s ]."""
    _check_s(complex(s) + shift)
    a, b = dirichlet_terms(spec, shift)
    return _out(series_ds(a, b, s), s)


def ds2_log_deriv(spec: LengthSpectrum, s, shift: float = 0.0):
    _check_s(complex(s) + shift)
    a, b = dirichlet_terms(spec, shift)
    return _out(series_ds2(a, b, s), s)


def zeta_partial(spec: LengthSpectrum, s, k_max: int):
    """prod over primitive records, 0 <= k <= k_max, of (1 - e^{-(s+k) ell})^mult."""
    s = _check_s(s)
    out = 1 + 0j
    for r in spec.records:
        if r.m != 1:
            continue
        for k in range(k_max + 1):
            out *= (1 - np.exp(-(s + k) * r.ell)) ** r.multiplicity
    return out


def growth_constant(spec: LengthSpectrum) -> float:
    """A with #{classes: ell <= x} <= A e^x, fitted on the data and doubled."""
    distinct = sorted({round(r.ell, 9) for r in spec.records})
    if len(distinct) < 2:
        raise UnfitError("need at least 2 distinct lengths to fit the growth constant")
    count = 0
    best = 0.0
    for r in spec.records:
        count += r.multiplicity
        best = max(best, count * math.exp(-r.ell))
    return 2 * best


def tail_bound(spec: LengthSpectrum, s, shift: float = 0.0) -> float:
    """Bound for the discarded terms ell > L of the log-derivative at s.

    With N(x) <= A e^x and sigma = Re(s) + shift > 1,

        tail <= (1 + 1/(e^L - 1)) A e^{(1-sigma) L} (sigma L/(sigma-1) + 1/(sigma-1)^2).

    The derivation is in docs/tail_bound.md.
    """
    sigma = complex(s).real + shift
    if not sigma > 1:
        raise DomainError(f"Re(s) = {sigma} must exceed 1")
    L = spec.cutoff
    A = growth_constant(spec)
    beta = sigma - 1
    # the integration by parts needs sigma x - 1 > 0 on (L, inf)
    L_eff = max(L, 1 / sigma)
    core = A * math.exp(-beta * L_eff) * (sigma * L_eff / beta + 1 / beta ** 2)
    return (1 + 1 / math.expm1(L)) * core


def lemma_check(spec: LengthSpectrum, s: float, tol: float = 1e-12) -> tuple[float, float, bool]:
    """(s^2 D_s L(s), L(s), lhs >= rhs >= 0) for real s > 1."""
    if isinstance(s, complex) or not s > 1:
        raise DomainError("lemma_check needs real s > 1")
    lhs = s * s * ds_log_deriv(spec, s)
    rhs = log_deriv(spec, s)
    scale = max(1.0, abs(lhs))
    return lhs, rhs, bool(lhs >= rhs - tol * scale and rhs >= -tol * scale)
