"""Monte Carlo Benjamini-Schramm statistics on compact hyperbolic surfaces.

Points of a surface (or of one of its finite covers) are sampled by
normalized hyperbolic area.  A point of the degree-k cover given by a sheet
action is a pair (z, i) with z in the Dirichlet domain D of the base group and
i a sheet; its local group is the stabilizer of sheet i.  Uniform z times
uniform i is the normalized area measure on the cover.

Sampling uses fixed-size chunks, each with its own SeedSequence stream keyed
by the chunk index, so the output does not depend on how many worker threads
run the chunks.  The sheet index comes from a separate stream, so the base
points are the same for every cover degree under one seed.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fuchsian import (BallEnumeration, CoverSpec, GroupPresentation, IncompleteBall,
                       enumerate_ball, trace_for_length)
from .hypgeom import HPoint, act_np, cosh_dist_np

__all__ = [
    "DomainSampler",
    "RejectionBudgetExceeded",
    "InjRad",
    "MCEstimate",
    "BSEstimate",
    "SampleProfile",
    "stats_ball",
    "dirichlet_membership",
    "sample_quotient_point",
    "inj_rad",
    "sample_profile",
    "bs_probability",
    "orbit_count_statistic",
    "wilson_interval",
    "bs_estimate",
    "orbit_estimate",
    "thread_count",
    "CHUNK",
]

CHUNK = 4096  # samples per RNG stream; part of the determinism contract


class RejectionBudgetExceeded(RuntimeError):
    pass


def thread_count(requested: int | None = None) -> int:
    cap = os.environ.get("BSZETA_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def stats_ball(pres: GroupPresentation, reach: float, **kw) -> BallEnumeration:
    """Ball containing every element that moves some point of D by <= reach."""
    from .fuchsian import dirichlet_domain

    domain = kw.pop("domain", None) or dirichlet_domain(pres)
    radius = 2 * domain.circumradius + reach + 1e-6
    return enumerate_ball(pres, trace_for_length(max(reach, 0.5)), radius=radius, domain=domain, **kw)


def dirichlet_membership(pres: GroupPresentation, ball: BallEnumeration, z) -> bool:
    """d(z, 0) <= d(z, g 0) for every g in the ball."""
    z = complex(z)
    if abs(z) >= 1:
        return False
    mats = ball.arrays()
    if ball.radius < 2 * ball.domain.circumradius:
        raise IncompleteBall("ball radius must cover twice the domain circumradius")
    imgs = mats[:, 0, 1] / mats[:, 1, 1]
    d0 = cosh_dist_np(np.array([z]), np.array([0j]))[0]
    d = cosh_dist_np(np.full(len(imgs), z), imgs)
    return bool(np.all(d0 <= d * (1 + 1e-12)))


class DomainSampler:
    """Area-uniform rejection sampler for the Dirichlet domain at the disk center.

    Proposals are uniform in hyperbolic area on the hyperbolic disk of radius
    equal to the domain's circumradius, which contains the domain.
    """

    def __init__(self, pres: GroupPresentation, ball: BallEnumeration, seed: int,
                 cover: CoverSpec | None = None, max_tries: int = 1000):
        self.pres = pres
        self.ball = ball
        self.domain = ball.domain
        self.seed = int(seed)
        self.cover = cover
        self.degree = cover.degree if cover is not None else 1
        self.rmax = self.domain.circumradius * (1 + 1e-12)
        self.max_tries = max_tries
        self._pos = 0
        self._buf: np.ndarray | None = None
        self._buf_sheets: np.ndarray | None = None
        self._buf_chunk = -1

    @property
    def proposal_area(self) -> float:
        return 2 * math.pi * (math.cosh(self.rmax) - 1)

    def _propose(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        theta = rng.random(n) * 2 * math.pi
        rho = np.arccosh(1 + u * (math.cosh(self.rmax) - 1))
        return np.tanh(rho / 2) * np.exp(1j * theta)

    def chunk(self, index: int, size: int = CHUNK) -> tuple[np.ndarray, np.ndarray]:
        """Accepted points and sheet indices of one chunk, fully determined by (seed, index)."""
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(index, 0)))
        got: list[np.ndarray] = []
        have = 0
        for _ in range(self.max_tries):
            z = self._propose(rng, size)
            z = z[self.domain.contains(z)]
            got.append(z)
            have += len(z)
            if have >= size:
                break
        else:
            raise RejectionBudgetExceeded(f"chunk {index}: rejection budget exhausted")
        pts = np.concatenate(got)[:size]
        sheet_rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(index, 1)))
        sheets = sheet_rng.integers(0, self.degree, size) if self.degree > 1 else np.zeros(size, int)
        return pts, sheets

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        pts, sheets = [], []
        for j in range(-(-n // CHUNK)):
            p, s = self.chunk(j)
            pts.append(p)
            sheets.append(s)
        if not pts:
            return np.zeros(0, complex), np.zeros(0, int)
        return np.concatenate(pts)[:n], np.concatenate(sheets)[:n]

    def next(self) -> tuple[complex, int]:
        j, k = divmod(self._pos, CHUNK)
        if j != self._buf_chunk:
            self._buf, self._buf_sheets = self.chunk(j)
            self._buf_chunk = j
        self._pos += 1
        return complex(self._buf[k]), int(self._buf_sheets[k])


def sample_quotient_point(sampler: DomainSampler) -> HPoint:
    z, _ = sampler.next()
    return HPoint(z)


@dataclass
class InjRad:
    value: float
    lower_bound_only: bool


def _fix_mask(ball: BallEnumeration, cover: CoverSpec | None, items) -> np.ndarray:
    """(len(items), degree) boolean: element fixes sheet i."""
    if cover is None:
        return np.ones((len(items), 1), dtype=bool)
    out = np.zeros((len(items), cover.degree), dtype=bool)
    for r, g in enumerate(items):
        p = cover.perm_of_word(g.word)
        for i in range(cover.degree):
            out[r, i] = p[i] == i
    return out


def _reach(ball: BallEnumeration, z) -> np.ndarray:
    """Displacement up to which the ball is complete at z: rho - 2 d(0, z)."""
    d0 = 2 * np.arctanh(np.minimum(np.abs(z), 1 - 1e-16))
    return ball.radius - 2 * d0


def inj_rad(pres: GroupPresentation, ball: BallEnumeration, z, cover: CoverSpec | None = None,
            sheet: int = 0) -> InjRad:
    """Half the least displacement of z by a nontrivial element (of the sheet stabilizer)."""
    zc = complex(z.z.value) if isinstance(z, HPoint) else complex(z)
    mats = ball.arrays()
    mask = _fix_mask(ball, cover, ball.neighborhood)[:, sheet if cover is not None else 0]
    ch = cosh_dist_np(np.full(int(mask.sum()), zc), act_np(mats[mask], np.array([zc]))[0])
    reach = float(_reach(ball, np.array([zc]))[0])
    if reach <= 0:
        raise IncompleteBall("point lies too far from the center for this ball")
    dmin = float(np.arccosh(ch.min())) if len(ch) else math.inf
    if dmin <= reach:
        return InjRad(dmin / 2, False)
    return InjRad(reach / 2, True)


@dataclass
class SampleProfile:
    """Per-sample minimal displacement and orbit counts at the requested radii."""

    n: int
    min_disp: np.ndarray
    counts: np.ndarray  # shape (n, len(c_grid))
    c_grid: tuple
    reach_ok: bool


@dataclass
class MCEstimate:
    value: float
    stderr: float
    n: int


@dataclass
class BSEstimate:
    p_hat: float
    ci95: tuple[float, float]
    hits: int
    n: int


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return (lo, hi)


def _chunk_profile(sampler: DomainSampler, j: int, size: int, mats, fix, c_grid, dmax):
    z, sheets = sampler.chunk(j)
    z, sheets = z[:size], sheets[:size]
    imgs = act_np(mats, z)  # (size, K)
    ch = cosh_dist_np(z[:, None], imgs)
    ch = np.where(fix[:, sheets].T, ch, np.inf)
    ch_min = ch.min(axis=1)
    min_disp = np.arccosh(np.maximum(ch_min, 1.0))
    counts = np.stack([(ch <= math.cosh(c)).sum(axis=1) for c in c_grid], axis=1) \
        if c_grid else np.zeros((len(z), 0), int)
    reach = _reach(sampler.ball, z)
    ok = bool(np.all(reach >= dmax))
    return min_disp, counts, ok


def sample_profile(pres: GroupPresentation, ball: BallEnumeration, n_samples: int, seed: int, *,
                   cover: CoverSpec | None = None, R_grid: Sequence[float] = (),
                   c_grid: Sequence[float] = (), threads: int | None = None) -> SampleProfile:
    """Displacement data for n_samples area-uniform points of the surface or cover.

    Minimal displacements are exact up to max(2 R_grid, c_grid); above that
    they are only known to exceed it, which is all the statistics need.
    """
    sampler = DomainSampler(pres, ball, seed, cover)
    dmax = max([2 * R for R in R_grid] + list(c_grid) + [0.0])
    mats_all = ball.arrays()
    disp0 = ball.displacements()
    keep = disp0 <= 2 * ball.domain.circumradius + dmax + 1e-9
    items = [g for g, k in zip(ball.neighborhood, keep) if k]
    mats = mats_all[keep]
    fix = _fix_mask(ball, cover, items)
    c_grid = tuple(float(c) for c in c_grid)
    n_chunks = -(-n_samples // CHUNK)
    sizes = [min(CHUNK, n_samples - j * CHUNK) for j in range(n_chunks)]
    nthreads = thread_count(threads)
    work = lambda j: _chunk_profile(sampler, j, sizes[j], mats, fix, c_grid, dmax)  # noqa: E731
    if nthreads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            parts = list(pool.map(work, range(n_chunks)))
    else:
        parts = [work(j) for j in range(n_chunks)]
    if not parts:
        return SampleProfile(0, np.zeros(0), np.zeros((0, len(c_grid)), int), c_grid, True)
    min_disp = np.concatenate([p[0] for p in parts])
    counts = np.concatenate([p[1] for p in parts])
    ok = all(p[2] for p in parts)
    if not ok:
        raise IncompleteBall(f"ball radius {ball.radius:.3f} does not reach displacement {dmax}")
    return SampleProfile(n_samples, min_disp, counts, c_grid, ok)


def bs_estimate(profile: SampleProfile, R: float) -> BSEstimate:
    hits = int(np.count_nonzero(profile.min_disp <= 2 * R))
    return BSEstimate(hits / profile.n if profile.n else 0.0, wilson_interval(hits, profile.n),
                      hits, profile.n)


def orbit_estimate(profile: SampleProfile, k: int) -> MCEstimate:
    col = profile.counts[:, k].astype(float)
    n = len(col)
    mean = math.fsum(col.tolist()) / n
    var = math.fsum(((col - mean) ** 2).tolist()) / (n - 1) if n > 1 else 0.0
    return MCEstimate(mean, math.sqrt(var / n), n)


def bs_probability(pres: GroupPresentation, ball: BallEnumeration, R: float, n_samples: int,
                   seed: int, cover: CoverSpec | None = None, threads: int | None = None) -> BSEstimate:
    """Monte Carlo P(InjRad <= R) with a Wilson 95% interval."""
    if not R > 0:
        raise ValueError("R must be positive")
    prof = sample_profile(pres, ball, n_samples, seed, cover=cover, R_grid=(R,), threads=threads)
    return bs_estimate(prof, R)


def orbit_count_statistic(pres: GroupPresentation, ball: BallEnumeration, c: float, n_samples: int,
                          seed: int, cover: CoverSpec | None = None,
                          threads: int | None = None) -> MCEstimate:
    """Mean number of nontrivial elements displacing a random point by at most c."""
    if not c > 0:
        raise ValueError("c must be positive")
    prof = sample_profile(pres, ball, n_samples, seed, cover=cover, c_grid=(c,), threads=threads)
    return orbit_estimate(prof, 0)
