"""Spectral side: Laplace eigenvalue data and the spectral D_s formulas.

Eigenvalues are ingested, never computed.  Spherical parameters satisfy
lambda = 1/4 + r^2, with the trivial representation at lambda_0 = 0
(r_0 = i/2).  Truncation beyond the largest supplied eigenvalue is estimated
with the two-dimensional Weyl law N(lambda) ~ vol * lambda / (4 pi); those
estimates only ever enlarge error budgets.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .fuchsian import LengthSpectrum
from .zetageom import UnfitError, log_deriv, tail_bound

__all__ = [
    "SpectralData",
    "SpectralValue",
    "IdentityResult",
    "OutOfRange",
    "phi_map",
    "h_s_eval",
    "hurwitz_sum",
    "paired_harmonic",
    "spectral_ds",
    "spectral_ds2",
    "identity_residual",
    "counting_function",
    "hkp_bound_check",
    "load_eigenvalues",
    "save_eigenvalues",
]

TRIVIAL = "triv"


class OutOfRange(ValueError):
    pass


@dataclass
class SpectralData:
    lambdas: list[float]
    vol: float
    source: str = ""
    lambda_err: float | list = 0.0  # absolute uncertainty, one value for all or one per eigenvalue
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = [float(x) for x in self.lambdas]
        if not lam or lam[0] != 0.0:
            raise ValueError("eigenvalue list must start with lambda_0 = 0")
        if any(b < a for a, b in zip(lam, lam[1:])):
            raise ValueError("eigenvalues must be ascending")
        if not self.vol > 0:
            raise ValueError("vol must be positive")
        self.lambdas = lam
        if isinstance(self.lambda_err, (list, tuple, np.ndarray)):
            err = [float(e) for e in self.lambda_err]
            if len(err) != len(lam):
                raise ValueError(f"lambda_err has {len(err)} entries for {len(lam)} eigenvalues")
            if any(not e >= 0 for e in err):
                raise ValueError("lambda_err entries must be nonnegative")
            self.lambda_err = err
        else:
            self.lambda_err = float(self.lambda_err)
            if not self.lambda_err >= 0:
                raise ValueError("lambda_err must be nonnegative")

    @property
    def lam(self) -> np.ndarray:
        return np.asarray(self.lambdas)

    @property
    def lambda_max(self) -> float:
        return self.lambdas[-1]

    @property
    def err(self) -> np.ndarray:
        """Per-eigenvalue absolute uncertainties."""
        return np.broadcast_to(np.asarray(self.lambda_err, dtype=float), (len(self.lambdas),))


class SpectralValue(NamedTuple):
    value: float
    tail: float  # Weyl-law estimate of the omitted eigenvalue terms


@dataclass
class IdentityResult:
    s: float
    b: float
    lhs: float
    rhs: float
    residual: float
    budget: float
    geometric_budget: float
    spectral_budget: float

    @property
    def ok(self) -> bool:
        # an unbounded budget verifies nothing
        return math.isfinite(self.budget) and abs(self.residual) <= self.budget


def phi_map(r) -> float:
    """lambda = 1/4 + r^2 on the spherical dual; the trivial representation maps to 0."""
    if isinstance(r, str):
        if r != TRIVIAL:
            raise OutOfRange(f"unknown representation tag {r!r}")
        return 0.0
    r = complex(r)
    if r.imag == 0:
        if r.real < 0:
            raise OutOfRange("real parameter must be nonnegative")
        return 0.25 + r.real ** 2
    if r.real == 0 and 0 < r.imag <= 0.5:
        return 0.25 - r.imag ** 2
    raise OutOfRange(f"parameter {r} is neither real >= 0 nor i t with 0 < t <= 1/2")


def h_s_eval(s: float, lam: float) -> float:
    if not s > 0.5:
        raise ValueError("h_s needs s > 1/2")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return 1.0 / (s * s + lam - 0.25) ** 3


def hurwitz_sum(p: int, a: float, N: int | None = None) -> float:
    """sum_{n>=0} (n + a)^-p by direct summation plus an Euler-Maclaurin tail."""
    if p not in (2, 3):
        raise ValueError("only p = 2, 3 are needed")
    if not a > 0:
        raise ValueError("a must be positive")
    if N is None:
        N = max(0, int(math.ceil(30 - a)))
    head = math.fsum((n + a) ** -p for n in range(N))
    x = N + a
    tail = [
        x ** (1 - p) / (p - 1),
        0.5 * x ** -p,
        p / 12 * x ** (-p - 1),
        -p * (p + 1) * (p + 2) / 720 * x ** (-p - 3),
        p * (p + 1) * (p + 2) * (p + 3) * (p + 4) / 30240 * x ** (-p - 5),
        -math.prod(range(p, p + 7)) / 1209600 * x ** (-p - 7),
    ]
    return head + math.fsum(tail)


def paired_harmonic(a1: float, a2: float, N: int | None = None) -> float:
    """sum_{n>=0} [1/(n + a1) - 1/(n + a2)], summed pairwise (= psi(a2) - psi(a1))."""
    if not (a1 > 0 and a2 > 0):
        raise ValueError("shifts must be positive")
    if N is None:
        N = max(0, int(math.ceil(30 - min(a1, a2))))
    da = a2 - a1
    head = math.fsum(da / ((n + a1) * (n + a2)) for n in range(N))
    x1, x2 = N + a1, N + a2

    def pdiff(k):
        # x1^-k - x2^-k without cancellation
        return -math.expm1(k * math.log1p(-da / x2)) / x1 ** k

    # Euler-Maclaurin for f(x) = 1/(x + a1) - 1/(x + a2) from x = N
    tail = [
        math.log1p(da / x1),
        0.5 * pdiff(1),
        pdiff(2) / 12,
        -pdiff(4) / 120,
        pdiff(6) / 252,
        -pdiff(8) / 240,
    ]
    return head + math.fsum(tail)


def _check_half(s):
    if not s > 0.5:
        raise ValueError("spectral formulas need real s > 1/2")


def _shifted(data: SpectralData, s: float) -> np.ndarray:
    return s * s + data.lam - 0.25


def spectral_ds(data: SpectralData, s: float) -> SpectralValue:
    """4s sum_j (s^2 + r_j^2)^-2 - (vol/pi) sum_n (s + 1/2 + n)^-2."""
    _check_half(s)
    q = _shifted(data, s)
    eig = 4 * s * math.fsum((1 / q ** 2).tolist())
    ident = data.vol / math.pi * hurwitz_sum(2, s + 0.5)
    tail = data.vol / (4 * math.pi) * 4 * s / (s * s + data.lambda_max - 0.25)
    return SpectralValue(eig - ident, tail)


def spectral_ds2(data: SpectralData, s: float) -> SpectralValue:
    """D_s applied to :func:`spectral_ds`.

    16 s sum_j (s^2 + r_j^2)^-3 - (vol/pi) [ s^-2 sum (s+1/2+n)^-2 + (2/s) sum (s+1/2+n)^-3 ]
    """
    _check_half(s)
    q = _shifted(data, s)
    eig = 16 * s * math.fsum((1 / q ** 3).tolist())
    ident = data.vol / math.pi * (hurwitz_sum(2, s + 0.5) / s ** 2 + 2 / s * hurwitz_sum(3, s + 0.5))
    tail = data.vol / (4 * math.pi) * 8 * s / (s * s + data.lambda_max - 0.25) ** 2
    return SpectralValue(eig - ident, tail)


def _paired_eigen_sum(data: SpectralData, s: float, b: float) -> float:
    q_s = _shifted(data, s)
    q_b = _shifted(data, b)
    return math.fsum(((b * b - s * s) / (q_s * q_b)).tolist())


def identity_residual(spec: LengthSpectrum, data: SpectralData, s: float, b: float) -> IdentityResult:
    """Residual of the two-point resolvent identity for Z'/Z at s + 1/2 and b + 1/2.

    (1/s) Z'/Z(s+1/2) = (1/b) Z'/Z(b+1/2) - (vol/pi) sum_n [1/(s+1/2+n) - 1/(b+1/2+n)]
                        + 2 sum_j [1/(s^2 + r_j^2) - 1/(b^2 + r_j^2)]
    """
    _check_half(s)
    _check_half(b)
    lhs = log_deriv(spec, s, shift=0.5) / s
    if s == b:
        return IdentityResult(s, b, lhs, lhs, 0.0, 0.0, 0.0, 0.0)
    ident = data.vol / math.pi * paired_harmonic(s + 0.5, b + 0.5)
    eig = 2 * _paired_eigen_sum(data, s, b)
    rhs = log_deriv(spec, b, shift=0.5) / b - ident + eig
    try:
        geo = tail_bound(spec, s, shift=0.5) / s + tail_bound(spec, b, shift=0.5) / b
    except UnfitError:
        geo = math.inf  # too few lengths to bound the truncation
    Lam = data.lambda_max
    weyl = 2 * data.vol / (4 * math.pi) * abs(math.log((b * b + Lam - 0.25) / (s * s + Lam - 0.25)))
    # first-order effect of the eigenvalue uncertainties on the paired sum
    q_s, q_b = _shifted(data, s), _shifted(data, b)
    data_err = 2 * float(np.sum(data.err * np.abs(1 / q_s ** 2 - 1 / q_b ** 2)))
    spectral_budget = 2 * weyl + data_err
    return IdentityResult(s, b, lhs, rhs, lhs - rhs, geo + spectral_budget, geo, spectral_budget)


def counting_function(data: SpectralData, T: float) -> int:
    """N(T) = #{j : lambda_j < T}."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    return int(np.searchsorted(data.lam, T, side="left"))


def hkp_bound_check(data: SpectralData, C: float, T_min: float = 1.0) -> tuple[bool, float]:
    """Check N(T) <= C vol T for T in [T_min, lambda_max].

    N is a left-continuous step function, so the worst points are T_min and
    the right limits just above each eigenvalue.  Returns (ok, T) with T the
    first violation, or the tightest point when the bound holds.
    """
    if not C > 0:
        raise ValueError("C must be positive")
    lam = data.lam
    # right limits above each eigenvalue: N = #{lambda <= lam_j}
    pts = [(T_min, counting_function(data, T_min))]
    for j, x in enumerate(lam):
        if x >= T_min and (j + 1 == len(lam) or lam[j + 1] > x):
            pts.append((float(x), j + 1))
    worst_T, worst_ratio = T_min, -1.0
    for T, n in pts:
        if T > data.lambda_max and T != T_min:
            break
        bound = C * data.vol * T
        if n > bound:
            return False, T
        ratio = n / bound
        if ratio > worst_ratio:
            worst_T, worst_ratio = T, ratio
    return True, worst_T


def load_eigenvalues(path) -> SpectralData:
    obj = json.loads(Path(path).read_text())
    for key in ("vol", "lambdas"):
        if key not in obj:
            raise ValueError(f"eigenvalue file {path}: missing field {key!r}")
    return SpectralData(lambdas=obj["lambdas"], vol=float(obj["vol"]), source=obj.get("source", ""),
                        lambda_err=obj.get("lambda_err", 0.0),
                        meta={k: v for k, v in obj.items()
                              if k not in ("vol", "lambdas", "source", "lambda_err")})


def save_eigenvalues(data: SpectralData, path) -> None:
    obj = {"vol": data.vol, "lambdas": data.lambdas, "source": data.source}
    if np.any(data.err):
        obj["lambda_err"] = data.lambda_err
    obj.update(data.meta)
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")
