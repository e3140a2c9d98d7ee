"""Surface groups, covers, element enumeration and truncated length spectra.

The enumeration strategy, in short:

* The Dirichlet domain F at the disk center is computed from a generous word
  ball and certified by Gauss-Bonnet: the computed polygon always contains the
  true domain, so equal area means equality.
* Its side pairings generate the group, and breadth-first growth over them,
  pruned at displacement radius rho, reaches every element moving the center
  at most rho (a path of tiles along the segment never leaves the ball).
* Every conjugacy class of length <= L has a representative whose axis meets
  the disk of radius R (circumradius of F) around the center; those
  representatives move the center by at most 2 asinh(cosh R sinh(L/2)).
  Two such representatives are conjugate by an element moving the center by
  at most 2R + L/2.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
import random
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import mpmath
import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, cKDTree

from .hypgeom import ElementType, classify_element, translation_length
from .numcore import (
    CONFIG,
    DedupIndex,
    GroupElement,
    PrecScalar,
    audit_separation,
    entry_distance,
    mat_inv,
    mat_mul,
)

log = logging.getLogger(__name__)

LENGTH_TOL = 1e-9


class BadRelator(ValueError):
    pass


class NonHyperbolicGenerator(ValueError):
    pass


class InvalidCover(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


class IncompleteBall(RuntimeError):
    pass


class EmptySpectrum(ValueError):
    def __init__(self, cutoff: float):
        super().__init__(f"no closed geodesic up to cutoff {cutoff}; systole > {cutoff}")
        self.lower_bound = cutoff


# --------------------------------------------------------------------------
# presentations


@dataclass
class GroupPresentation:
    genus: int
    generators: list[GroupElement]
    relator: tuple[int, ...]
    model: str = "disk"
    name: str = ""

    def __post_init__(self):
        if self.genus < 2:
            raise ValueError("genus must be at least 2")
        n = len(self.generators)
        for x in self.relator:
            if x == 0 or abs(x) > n:
                raise ValueError(f"relator letter {x} out of range 1..{n}")
        self.generators = [
            GroupElement(g.vals, g.errs, word=(i + 1,), canonical=True)
            for i, g in enumerate(self.generators)
        ]

    @property
    def covolume(self) -> float:
        return 4 * math.pi * (self.genus - 1)

    def letter(self, x: int) -> GroupElement:
        g = self.generators[abs(x) - 1]
        return g if x > 0 else mat_inv(g)

    def evaluate(self, word: Sequence[int]) -> GroupElement:
        out = GroupElement.identity()
        for x in word:
            out = mat_mul(out, self.letter(x))
        return out


def validate_group(pres: GroupPresentation) -> float:
    """Check generators and relator; return the covolume 4 pi (genus - 1)."""
    if len(pres.generators) != 2 * pres.genus:
        raise ValueError(f"genus {pres.genus} needs {2 * pres.genus} generators")
    for i, g in enumerate(pres.generators):
        det = g.det()
        if abs(det.value - 1) > det.err + CONFIG.dedup_tol:
            raise ValueError(f"generator {i + 1} does not have unit determinant")
        a, b, c, d = g.vals
        if (abs(c - mpmath.conj(b)) > g.errs[1] + g.errs[2] + CONFIG.dedup_tol
                or abs(d - mpmath.conj(a)) > g.errs[0] + g.errs[3] + CONFIG.dedup_tol):
            raise ValueError(f"generator {i + 1} is not a disk-model (SU(1,1)) matrix")
        if classify_element(g) is not ElementType.HYPERBOLIC:
            raise NonHyperbolicGenerator(f"generator {i + 1} is not hyperbolic")
    r = pres.evaluate(pres.relator)
    if classify_element(r) is not ElementType.IDENTITY:
        raise BadRelator(f"relator evaluates to {r!r}, not +-I")
    return pres.covolume


def bolza_presentation() -> GroupPresentation:
    """The Bolza surface group: side pairings of the regular octagon with angles pi/4."""
    s2 = mpmath.sqrt(2)
    a = 1 + s2
    b = mpmath.sqrt(2 + 2 * s2)
    gens = []
    for k in range(4):
        w = mpmath.expjpi(mpmath.mpf(k) / 4)
        gens.append(GroupElement.from_values(a, b * w, b * mpmath.conj(w), a))
    return GroupPresentation(genus=2, generators=gens, relator=(1, -2, 3, -4, -1, 2, -3, 4),
                             model="disk", name="bolza")


def _mp_str(x, digits: int) -> str:
    if x == 0:
        return "0"
    return mpmath.nstr(x, digits, strip_zeros=False, min_fixed=-1, max_fixed=1)


def group_to_json(pres: GroupPresentation, digits: int = 60) -> dict:
    gens = []
    for g in pres.generators:
        gens.append([[_mp_str(mpmath.re(v), digits), _mp_str(mpmath.im(v), digits)]
                     for v in g.vals])
    return {"model": "disk", "name": pres.name, "genus": pres.genus,
            "generators": gens, "relator": list(pres.relator)}


def group_from_json(obj: dict) -> GroupPresentation:
    model = obj.get("model", "disk")
    gens = []
    for i, entries in enumerate(obj["generators"]):
        if len(entries) != 4:
            raise ValueError(f"generator {i + 1}: expected 4 entries (a, b, c, d)")
        scalars = []
        for e in entries:
            if isinstance(e, (list, tuple)):
                scalars.append(PrecScalar.from_decimal(str(e[0]), str(e[1])))
            else:
                scalars.append(PrecScalar.from_decimal(str(e), "0"))
        if model == "halfplane":
            from .hypgeom import cayley_matrix
            gens.append(cayley_matrix(*(s.value for s in scalars)))
        elif model == "disk":
            gens.append(GroupElement.from_scalars(scalars))
        else:
            raise ValueError(f"unknown model tag {model!r}")
    relator = obj["relator"]
    for tok in relator:
        if not isinstance(tok, int) or tok == 0 or abs(tok) > len(gens):
            raise ValueError(f"relator token {tok!r} is not a signed generator index 1..{len(gens)}")
    return GroupPresentation(genus=int(obj["genus"]), generators=gens, relator=tuple(relator),
                             model="disk", name=obj.get("name", ""))


def load_group(path) -> GroupPresentation:
    return group_from_json(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# covers


@dataclass
class CoverSpec:
    """Right action of the generators on {0..k-1}; the subgroup fixes point 0."""

    degree: int
    images: list[tuple[int, ...]]
    name: str = ""

    def __post_init__(self):
        self.images = [tuple(int(x) for x in p) for p in self.images]
        for p in self.images:
            if sorted(p) != list(range(self.degree)):
                raise InvalidCover(f"{p} is not a permutation of 0..{self.degree - 1}")
        self._inv = [tuple(np.argsort(p).tolist()) for p in self.images]

    def letter_perm(self, x: int) -> tuple[int, ...]:
        return self.images[x - 1] if x > 0 else self._inv[-x - 1]

    def perm_of_word(self, word: Sequence[int]) -> tuple[int, ...]:
        p = list(range(self.degree))
        for x in word:
            img = self.letter_perm(x)
            p = [img[i] for i in p]
        return tuple(p)

    def validate(self, pres: GroupPresentation) -> None:
        if len(self.images) != len(pres.generators):
            raise InvalidCover("one permutation per generator required")
        if self.perm_of_word(pres.relator) != tuple(range(self.degree)):
            raise InvalidCover("relator does not act trivially")
        seen, stack = {0}, [0]
        while stack:
            i = stack.pop()
            for p in self.images + self._inv:
                if p[i] not in seen:
                    seen.add(p[i])
                    stack.append(p[i])
        if len(seen) != self.degree:
            raise InvalidCover("permutation action is not transitive")

    def to_json(self) -> dict:
        return {"degree": self.degree, "images": [list(p) for p in self.images], "name": self.name}

    @classmethod
    def from_json(cls, obj: dict) -> "CoverSpec":
        return cls(degree=int(obj["degree"]), images=[tuple(p) for p in obj["images"]],
                   name=obj.get("name", ""))


def trivial_cover(pres: GroupPresentation) -> CoverSpec:
    return CoverSpec(1, [(0,)] * len(pres.generators), name="trivial")


def cyclic_cover(pres: GroupPresentation, n: int, generator: int = 1,
                 weights: Sequence[int] | None = None) -> CoverSpec:
    """Z/n cover from a homomorphism to Z.

    By default ``generator`` shifts by one and the others act trivially;
    ``weights`` gives the shift of every generator instead.
    """
    if weights is None:
        weights = [1 if j + 1 == generator else 0 for j in range(len(pres.generators))]
    if len(weights) != len(pres.generators):
        raise InvalidCover("one weight per generator required")
    images = [tuple((i + w) % n for i in range(n)) for w in weights]
    tag = "" if list(weights).count(0) == len(weights) - 1 and weights[generator - 1] == 1 \
        else "w" + "_".join(str(w) for w in weights)
    cov = CoverSpec(n, images, name=f"cyclic{n}{tag}")
    cov.validate(pres)
    return cov


def _cycles(p: Sequence[int]) -> list[list[int]]:
    seen, out = set(), []
    for i in range(len(p)):
        if i in seen:
            continue
        cyc, j = [], i
        while j not in seen:
            seen.add(j)
            cyc.append(j)
            j = p[j]
        out.append(cyc)
    return out


def cycle_type(p: Sequence[int]) -> list[int]:
    return sorted(len(c) for c in _cycles(p))


def random_cover(pres: GroupPresentation, degree: int, seed: int, max_tries: int = 100000) -> CoverSpec:
    """Transitive permutation cover drawn from ``seed``.

    All but one generator get uniform random permutations; the remaining one
    is solved for so the relator acts trivially (it conjugates one
    permutation onto another of the same cycle type).
    """
    rel = list(pres.relator)
    counts = {}
    for x in rel:
        counts.setdefault(abs(x), []).append(x)
    solvable = [g for g, occ in counts.items() if len(occ) == 2 and occ[0] == -occ[1]]
    if not solvable:
        raise InvalidCover("relator shape not supported for random covers")
    t = max(solvable)
    if rel.count(t) and rel.index(t) < rel.index(-t):
        rel = [-x for x in reversed(rel)]
    k = rel.index(-t)
    rel = rel[k:] + rel[:k]
    j = rel.index(t)
    x_word, y_word = rel[1:j], rel[j + 1:]
    rng = random.Random(seed)
    ngen = len(pres.generators)
    for _ in range(max_tries):
        images: list = []
        for g in range(1, ngen + 1):
            p = list(range(degree))
            if g != t:
                rng.shuffle(p)
            images.append(tuple(p))
        tmp = CoverSpec(degree, images)
        px = tmp.perm_of_word(x_word)
        py_inv = tmp.perm_of_word([-x for x in reversed(y_word)])
        cx, cy = _cycles(px), _cycles(py_inv)
        if sorted(map(len, cx)) != sorted(map(len, cy)):
            continue
        by_len: dict = {}
        for c in cy:
            by_len.setdefault(len(c), []).append(c)
        for v in by_len.values():
            rng.shuffle(v)
        sigma = [0] * degree
        for c in sorted(cx, key=lambda c: (len(c), c)):
            target = by_len[len(c)].pop()
            off = rng.randrange(len(c))
            for i, xi in enumerate(c):
                sigma[xi] = target[(i + off) % len(c)]
        images[t - 1] = tuple(sigma)
        cov = CoverSpec(degree, images, name=f"perm{degree}-seed{seed}")
        try:
            cov.validate(pres)
        except InvalidCover:
            continue
        return cov
    raise BudgetExceeded("no transitive cover found within max_tries")


def load_cover(path) -> CoverSpec:
    return CoverSpec.from_json(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# Dirichlet domain


def _disp(arr: np.ndarray) -> float:
    """Displacement of the disk center by an SU(1,1) float matrix."""
    return 2 * math.acosh(max(1.0, abs(arr[0, 0])))


def _center_image(arr: np.ndarray) -> complex:
    return arr[0, 1] / arr[1, 1]


@dataclass
class DirichletDomain:
    """Dirichlet polygon at the disk center (float64 geometry)."""

    vertices: np.ndarray  # Poincare-disk coordinates, counterclockwise
    side_elements: list[GroupElement]
    circumradius: float
    inradius: float
    area: float
    walls: np.ndarray  # images of the center whose bisectors bound the domain

    def contains(self, z, slack: float = 0.0) -> np.ndarray:
        """Vectorized membership: d(z, 0) <= d(z, g 0) for every wall element g."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        k = 2 * z / (1 + np.abs(z) ** 2)
        p = self.walls
        lhs = k.real[:, None] * p.real[None, :] + k.imag[:, None] * p.imag[None, :]
        return np.all(lhs <= np.abs(p)[None, :] ** 2 + slack, axis=1)


def _word_ball(pres: GroupPresentation, rho: float, max_elements: int) -> list[GroupElement]:
    letters = [pres.letter(x) for x in _letters(pres)]
    index = DedupIndex()
    ident = GroupElement.identity()
    index.add(ident)
    frontier = [ident]
    while frontier:
        nxt = []
        for g in frontier:
            ga = g.as_array()
            for s in letters:
                if _disp(ga @ s.as_array()) > rho + 1e-9:
                    continue
                h = mat_mul(g, s)
                _, new = index.add(h)
                if new:
                    nxt.append(h)
                    if len(index) > max_elements:
                        raise BudgetExceeded(f"more than {max_elements} elements")
        frontier = nxt
    return index.items[1:]


def _letters(pres: GroupPresentation) -> list[int]:
    n = len(pres.generators)
    return [i for i in range(1, n + 1)] + [-i for i in range(1, n + 1)]


def _polygon_from(elems: list[GroupElement]):
    pts = np.array([_center_image(e.as_array()) for e in elems])
    hs = np.column_stack([pts.real, pts.imag, -np.abs(pts) ** 2])
    try:
        inter = HalfspaceIntersection(hs, np.zeros(2))
    except Exception:  # qhull failure means unbounded or degenerate
        return None
    v = inter.intersections
    if np.any(np.hypot(v[:, 0], v[:, 1]) >= 1 - 1e-12):
        return None
    hull = ConvexHull(v)
    verts = v[hull.vertices]
    ang = np.arctan2(verts[:, 1], verts[:, 0])
    verts = verts[np.argsort(ang)]
    # merge numerically repeated vertices (several bisectors can be concurrent)
    keep = [verts[0]]
    for w in verts[1:]:
        if np.hypot(*(w - keep[-1])) > 1e-10:
            keep.append(w)
    if len(keep) > 1 and np.hypot(*(keep[0] - keep[-1])) <= 1e-10:
        keep.pop()
    return np.array(keep), pts


def _klein_cosh(k1, k2) -> float:
    return (1 - k1 @ k2) / math.sqrt((1 - k1 @ k1) * (1 - k2 @ k2))


def _triangle_area(ca: float, cb: float, cc: float) -> float:
    """Area from cosh of the three sides (angle defect)."""
    a, b, c = (math.acosh(max(1.0, x)) for x in (ca, cb, cc))

    def angle(opp_c, s1, s2, c1, c2):
        den = math.sinh(s1) * math.sinh(s2)
        if den == 0:
            return 0.0
        return math.acos(max(-1.0, min(1.0, (c1 * c2 - opp_c) / den)))

    A = angle(ca, b, c, cb, cc)
    B = angle(cb, a, c, ca, cc)
    C = angle(cc, a, b, ca, cb)
    return max(0.0, math.pi - A - B - C)


def dirichlet_domain(pres: GroupPresentation, radius: float | None = None,
                     max_radius: float = 14.0, max_elements: int = 200000) -> DirichletDomain:
    """Compute and certify (by area) the Dirichlet domain at the disk center."""
    covol = pres.covolume
    rho = radius if radius is not None else 2 * max(_disp(g.as_array()) for g in pres.generators)
    while rho <= max_radius:
        elems = _word_ball(pres, rho, max_elements)
        got = _polygon_from(elems)
        if got is not None:
            verts, pts = got
            origin = np.zeros(2)
            area = 0.0
            n = len(verts)
            for i in range(n):
                v1, v2 = verts[i], verts[(i + 1) % n]
                area += _triangle_area(_klein_cosh(v1, v2), _klein_cosh(origin, v1),
                                       _klein_cosh(origin, v2))
            if abs(area - covol) <= 1e-7 * covol:
                walls_idx, sides = [], []
                for i in range(n):
                    v1, v2 = verts[i], verts[(i + 1) % n]
                    res = [abs(v1 @ [p.real, p.imag] - abs(p) ** 2) + abs(v2 @ [p.real, p.imag] - abs(p) ** 2)
                           for p in pts]
                    j = int(np.argmin(res))
                    sides.append(j)
                # walls: every element whose bisector touches the polygon
                slack = np.abs(verts @ np.vstack([pts.real, pts.imag]) - np.abs(pts) ** 2)
                walls_idx = np.where(slack.min(axis=0) < 1e-9)[0]
                kr = np.hypot(verts[:, 0], verts[:, 1])
                circ = float(np.max(np.arctanh(kr)))
                inr = float(np.min(np.arctanh(np.abs(pts[sides]))))
                poinc = (verts[:, 0] + 1j * verts[:, 1]) / (1 + np.sqrt(1 - kr ** 2))
                side_elems = []
                seen = set()
                for j in sides:
                    if j not in seen:
                        seen.add(j)
                        side_elems.append(elems[j])
                side_elems.sort(key=lambda g: (len(g.word), g.word))
                return DirichletDomain(vertices=poinc, side_elements=side_elems,
                                       circumradius=circ, inradius=inr, area=area,
                                       walls=pts[walls_idx])
            log.debug("dirichlet area %.9f != covolume %.9f at rho=%.2f", area, covol, rho)
        rho += 2.0
    raise BudgetExceeded(f"Dirichlet domain not certified up to radius {max_radius}")


# --------------------------------------------------------------------------
# ball enumeration


def _sinh_half(d: float) -> float:
    return math.sinh(d / 2)


@dataclass
class BallEnumeration:
    """Elements of the group up to a displacement radius, with class candidates.

    ``neighborhood`` holds every nontrivial element moving the disk center by
    at most ``radius``; ``elements`` holds those with |trace| <= trace_bound
    whose axis passes within the domain circumradius of the center (every
    conjugacy class with |trace| <= trace_bound has such a representative).
    """

    presentation: GroupPresentation
    trace_bound: float
    radius: float
    neighborhood: list[GroupElement]
    elements: list[GroupElement]
    complete_up_to_trace: float
    domain: DirichletDomain
    separation: float
    covolume: float
    cover: CoverSpec | None = None
    meta: dict = field(default_factory=dict)

    def displacements(self, which: str = "neighborhood") -> np.ndarray:
        return np.array([_disp(g.as_array()) for g in getattr(self, which)])

    def arrays(self, which: str = "neighborhood") -> np.ndarray:
        items = getattr(self, which)
        if not items:
            return np.zeros((0, 2, 2), dtype=complex)
        return np.stack([g.as_array() for g in items])


def length_for_trace(trace_bound: float) -> float:
    return 2 * math.acosh(trace_bound / 2)


def trace_for_length(L: float) -> float:
    return 2 * math.cosh(L / 2)


def ball_radius(domain: DirichletDomain, trace_bound: float) -> float:
    R = domain.circumradius + 1e-9
    ell = length_for_trace(max(trace_bound, 2.0))
    reps = 2 * math.asinh(math.cosh(R) * math.sinh(ell / 2))
    return max(reps, 2 * R + ell / 2) + 1e-9


def enumerate_ball(pres: GroupPresentation, trace_bound: float, *, radius: float | None = None,
                   domain: DirichletDomain | None = None,
                   max_elements: int = 400000) -> BallEnumeration:
    if not trace_bound > 2:
        raise ValueError("trace_bound must exceed 2")
    domain = domain or dirichlet_domain(pres)
    rho = ball_radius(domain, trace_bound)
    if radius is not None:
        rho = max(rho, radius)
    gens = domain.side_elements
    index = DedupIndex()
    ident = GroupElement.identity()
    index.add(ident)
    frontier = [ident]
    while frontier:
        nxt = []
        for g in frontier:
            ga = g.as_array()
            for s in gens:
                if _disp(ga @ s.as_array()) > rho + 1e-9:
                    continue
                h = mat_mul(g, s)
                _, new = index.add(h)
                if new:
                    nxt.append(h)
                    if len(index) > max_elements:
                        raise BudgetExceeded(
                            f"ball of radius {rho:.3f} exceeds {max_elements} elements")
        frontier = nxt
    neighborhood = index.items[1:]
    neighborhood.sort(key=lambda g: (len(g.word), g.word))
    sep = audit_separation(index.items)
    R = domain.circumradius + 1e-9
    elements = []
    for g in neighborhood:
        t = g.trace_abs()
        if t > trace_bound or t <= 2:
            continue
        ell = length_for_trace(t)
        if _sinh_half(_disp(g.as_array())) <= math.cosh(R) * math.sinh(ell / 2) * (1 + 1e-9):
            elements.append(g)
    return BallEnumeration(presentation=pres, trace_bound=trace_bound, radius=rho,
                           neighborhood=neighborhood, elements=elements,
                           complete_up_to_trace=trace_bound, domain=domain,
                           separation=sep, covolume=pres.covolume)


def enumerate_words(pres: GroupPresentation, max_len: int) -> list[GroupElement]:
    """Distinct nontrivial elements given by freely reduced words of length <= max_len."""
    index = DedupIndex()
    index.add(GroupElement.identity())
    frontier = [GroupElement.identity()]
    for _ in range(max_len):
        nxt = []
        for g in frontier:
            for x in _letters(pres):
                if g.word and g.word[-1] == -x:
                    continue
                h = mat_mul(g, pres.letter(x))
                _, new = index.add(h)
                if new:
                    nxt.append(h)
        frontier = nxt
    return index.items[1:]


def cover_elements(pres: GroupPresentation, cover: CoverSpec, ball: BallEnumeration) -> BallEnumeration:
    """Restrict a ball to the finite-index subgroup fixing sheet 0."""
    cover.validate(pres)

    def keep(items):
        return [g for g in items if cover.perm_of_word(g.word)[0] == 0]

    return BallEnumeration(presentation=pres, trace_bound=ball.trace_bound, radius=ball.radius,
                           neighborhood=keep(ball.neighborhood), elements=keep(ball.elements),
                           complete_up_to_trace=ball.complete_up_to_trace, domain=ball.domain,
                           separation=ball.separation, covolume=cover.degree * ball.covolume,
                           cover=cover, meta=dict(ball.meta))


# --------------------------------------------------------------------------
# conjugacy classes


def _canon_float(mats: np.ndarray) -> np.ndarray:
    """(..., 2, 2) complex -> (..., 8) real with the canonical sign rule."""
    comps = np.stack([mats[..., 0, 0].real, mats[..., 0, 0].imag, mats[..., 0, 1].real,
                      mats[..., 0, 1].imag, mats[..., 1, 0].real, mats[..., 1, 0].imag,
                      mats[..., 1, 1].real, mats[..., 1, 1].imag], axis=-1)
    big = np.abs(comps) > 1e-8
    first = np.argmax(big, axis=-1)
    sign = np.sign(np.take_along_axis(comps, first[..., None], axis=-1))
    sign[sign == 0] = 1
    return comps * sign


class _UnionFind:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, i):
        while self.p[i] != i:
            self.p[i] = self.p[self.p[i]]
            i = self.p[i]
        return i

    def union(self, i, j):
        a, b = self.find(i), self.find(j)
        if a != b:
            self.p[max(a, b)] = min(a, b)


def _shortlex(g: GroupElement):
    return (len(g.word), g.word)


@dataclass
class ConjClass:
    rep: GroupElement
    members: list[GroupElement]
    ell: float
    trace_abs: float
    ell0: float | None = None
    power: int | None = None
    root: "ConjClass | None" = None


@dataclass
class Classification:
    classes: list[ConjClass]
    conj_depth: int
    conj_radius: float
    certified: bool
    warnings: list[str]

    def class_of(self, idx: int) -> ConjClass:
        return self._by_member[idx]


class _ElementLocator:
    """Float KD-tree over canonical components, verified in high precision."""

    def __init__(self, elems: list[GroupElement]):
        self.elems = elems
        pts = _canon_float(np.stack([g.as_array() for g in elems])) if elems else np.zeros((0, 8))
        self.tree = cKDTree(pts) if elems else None

    def query(self, mats: np.ndarray, tol: float = 1e-6) -> np.ndarray:
        if self.tree is None:
            return np.full(mats.shape[:-2], -1)
        pts = _canon_float(mats)
        flat = pts.reshape(-1, 8)
        dist, idx = self.tree.query(flat, k=1, p=np.inf, distance_upper_bound=tol)
        idx = np.where(np.isfinite(dist), idx, -1)
        return idx.reshape(mats.shape[:-2])

    def locate(self, g: GroupElement) -> int | None:
        i = int(self.query(g.as_array()[None])[0])
        if i < 0:
            return None
        y = self.elems[i]
        if entry_distance(g, y) <= CONFIG.dedup_tol + g.err + y.err:
            return i
        return None


def conjugacy_classes(ball: BallEnumeration, conj_depth: int | None = None) -> Classification:
    """Partition ``ball.elements`` into conjugacy classes of the (sub)group.

    Conjugators are neighborhood elements with word length <= conj_depth that
    move the center by at most 2R + L/2 (restricted to the subgroup for a
    cover ball).  Every merge is confirmed in high precision.
    """
    elems = ball.elements
    if not elems:
        return Classification([], conj_depth or 0, 0.0, True, [])
    R = ball.domain.circumradius + 1e-9
    Lmax = length_for_trace(ball.trace_bound)
    conj_radius = 2 * R + Lmax / 2
    max_word = max(len(g.word) for g in elems)
    if conj_depth is None:
        conj_depth = max_word + 4
    disp = ball.displacements("neighborhood")
    within = [g for g, d in zip(ball.neighborhood, disp) if d <= conj_radius + 1e-9]
    conjugators = [g for g in within if len(g.word) <= conj_depth]
    warns = []
    certified = True
    if len(conjugators) < len(within):
        certified = False
        warns.append(
            f"depth-insufficient: conj_depth={conj_depth} drops {len(within) - len(conjugators)} "
            f"conjugators within radius {conj_radius:.3f}")
    if ball.cover is not None:
        warns.append("cover ball: subgroup conjugators limited to the base conjugation radius")
        certified = False
    if ball.radius < conj_radius:
        certified = False
        warns.append("ball radius smaller than the certified conjugation radius")

    locator = _ElementLocator(elems)
    uf = _UnionFind(len(elems))
    S = np.stack([g.as_array() for g in elems])
    for h in conjugators:
        H = h.as_array()
        Hi = np.array([[H[1, 1], -H[0, 1]], [-H[1, 0], H[0, 0]]])
        conj = H[None] @ S @ Hi[None]
        hits = locator.query(conj)
        for i in np.nonzero(hits >= 0)[0]:
            j = int(hits[i])
            if uf.find(i) == uf.find(j):
                continue
            c = mat_mul(mat_mul(h, elems[i]), mat_inv(h))
            if entry_distance(c, elems[j]) <= CONFIG.dedup_tol + c.err + elems[j].err:
                uf.union(int(i), j)
    groups: dict[int, list[int]] = {}
    for i in range(len(elems)):
        groups.setdefault(uf.find(i), []).append(i)
    classes = []
    by_member = {}
    for idxs in groups.values():
        members = sorted((elems[i] for i in idxs), key=_shortlex)
        rep = members[0]
        ell = translation_length(rep)
        traces = [g.trace_abs() for g in members]
        if max(traces) - min(traces) > 1e-8 * max(traces):
            raise ArithmeticError("trace not constant on a conjugacy class")
        cls = ConjClass(rep=rep, members=members, ell=ell, trace_abs=rep.trace_abs())
        classes.append(cls)
        for i in idxs:
            by_member[i] = cls
    classes.sort(key=lambda c: (round(c.ell, 9), _shortlex(c.rep)))
    # classes with equal trace that no certified invariant separates
    if not certified:
        for w in warns:
            warnings.warn(w)
    result = Classification(classes, conj_depth, conj_radius, certified, warns)
    result._by_member = by_member
    result._locator = locator
    return result


def _closest_member(cls: ConjClass) -> GroupElement:
    return min(cls.members, key=lambda g: (_disp(g.as_array()), _shortlex(g)))


def _power(g: GroupElement, m: int) -> GroupElement:
    out = g
    for _ in range(m - 1):
        out = mat_mul(out, g)
    return out


def decompose_classes(classification: Classification, trace_bound: float) -> None:
    """Fill ``ell0``, ``power`` and ``root`` on every class (maximal root)."""
    classes = classification.classes
    if not classes:
        return
    loc = classification._locator
    by_member = classification._by_member
    sys_len = min(c.ell for c in classes)
    Lmax = length_for_trace(trace_bound)
    for c in classes:
        c.ell0, c.power, c.root = c.ell, 1, None
    for root in classes:
        h = _closest_member(root)
        m = 2
        while m * root.ell <= Lmax + LENGTH_TOL:
            hm = _power(h, m)
            i = loc.locate(hm)
            if i is None:
                raise IncompleteBall(
                    f"power {m} of a class representative fell outside the ball")
            target = by_member[i]
            if m > target.power:
                target.ell0, target.power, target.root = root.ell, m, root
            m += 1
    for c in classes:
        if c.ell0 < sys_len - LENGTH_TOL:
            raise ArithmeticError("root shorter than the systole")


def primitive_decomposition(g: GroupElement, ball: BallEnumeration,
                            classification: Classification | None = None) -> tuple[float, int]:
    """(primitive length, power) of a hyperbolic element via the ball's classes."""
    ell = translation_length(g)
    if g.trace_abs() > ball.complete_up_to_trace + 1e-9:
        raise IncompleteBall("element trace exceeds the ball's certified bound")
    classification = classification or conjugacy_classes(ball)
    if classification.classes and classification.classes[0].power is None:
        decompose_classes(classification, ball.trace_bound)
    i = classification._locator.locate(g)
    if i is None:
        # try to bring g into the candidate set by a neighborhood conjugation
        arrs = ball.arrays("neighborhood")
        G = g.as_array()
        inv = np.stack([np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) for a in arrs])
        hits = classification._locator.query(arrs @ G[None] @ inv)
        for k in np.nonzero(hits >= 0)[0]:
            h = ball.neighborhood[k]
            c = mat_mul(mat_mul(h, g), mat_inv(h))
            i = classification._locator.locate(c)
            if i is not None:
                break
    if i is None:
        raise IncompleteBall("element is not conjugate into the enumerated candidates")
    cls = classification._by_member[i]
    # a root has smaller trace than g, so it is inside any ball complete up to |tr g|
    assert cls.ell0 is not None and cls.ell0 <= ell + LENGTH_TOL
    return cls.ell0, cls.power


# --------------------------------------------------------------------------
# length spectra


@dataclass(frozen=True)
class ConjClassRecord:
    ell0: float
    m: int
    ell: float
    multiplicity: int
    trace_abs: float

    def __post_init__(self):
        if not (self.ell0 > 0 and self.m >= 1 and self.multiplicity >= 1):
            raise ValueError(f"invalid record {self}")
        if abs(self.ell - self.m * self.ell0) > 1e-7 * max(1.0, self.ell):
            raise ValueError(f"ell != m * ell0 in {self}")


@dataclass
class LengthSpectrum:
    cutoff: float
    records: list[ConjClassRecord]
    covolume: float
    complete: bool
    meta: dict = field(default_factory=dict)
    primitives: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.covolume > 0:
            raise ValueError("covolume must be positive")
        self.records = sorted(self.records, key=lambda r: (r.ell, r.ell0, r.m))
        for r in self.records:
            if r.ell > self.cutoff + LENGTH_TOL:
                raise ValueError(f"record length {r.ell} exceeds cutoff {self.cutoff}")

    def arrays(self):
        """(weights-free) columns as numpy arrays: ell0, m, ell, multiplicity."""
        if not self.records:
            z = np.zeros(0)
            return z, z, z, z
        return (np.array([r.ell0 for r in self.records]), np.array([r.m for r in self.records]),
                np.array([r.ell for r in self.records]),
                np.array([r.multiplicity for r in self.records], dtype=float))

    def class_count(self) -> int:
        return sum(r.multiplicity for r in self.records)

    def truncate(self, L: float) -> "LengthSpectrum":
        return LengthSpectrum(L, [r for r in self.records if r.ell <= L + LENGTH_TOL],
                              self.covolume, self.complete, dict(self.meta, cutoff=L),
                              [p for p in self.primitives if p[0] <= L + LENGTH_TOL])


def _aggregate(entries) -> list[ConjClassRecord]:
    """entries: iterable of (ell0, m, ell, trace_abs) per class."""
    entries = sorted(entries)
    out: list = []
    for ell0, m, ell, tr in entries:
        if out and out[-1][1] == m and abs(out[-1][0] - ell0) <= LENGTH_TOL * max(1, ell0):
            out[-1][3] += 1
        else:
            out.append([ell0, m, ell, 1, tr])
    return [ConjClassRecord(ell0=e0, m=m, ell=e, multiplicity=k, trace_abs=t) for e0, m, e, k, t in out]


def length_spectrum(pres: GroupPresentation, L: float, *, cover: CoverSpec | None = None,
                    conj_depth: int | None = None, max_elements: int = 400000,
                    domain: DirichletDomain | None = None) -> LengthSpectrum:
    """Truncated length spectrum of the base group or of a cover.

    Cover spectra come from lifting: a primitive base class of length l whose
    representative acts on the sheets with cycle lengths c_1..c_r gives
    primitive cover classes of lengths c_i * l.
    """
    if not L > 0:
        raise ValueError("cutoff must be positive")
    validate_group(pres)
    domain = domain or dirichlet_domain(pres)
    tb = trace_for_length(L)
    ball = enumerate_ball(pres, tb, domain=domain, max_elements=max_elements)
    classification = conjugacy_classes(ball, conj_depth)
    decompose_classes(classification, tb)
    prims = [(c.ell, c.rep.word, c.trace_abs) for c in classification.classes if c.power == 1]
    meta = {
        "cutoff": L,
        "trace_bound": tb,
        "ball_radius": ball.radius,
        "ball_size": len(ball.neighborhood),
        "candidates": len(ball.elements),
        "separation": ball.separation,
        "domain_circumradius": domain.circumradius,
        "domain_area": domain.area,
        "conj_depth": classification.conj_depth,
        "warnings": list(classification.warnings),
        "classes": len(classification.classes),
    }
    complete = classification.certified
    if cover is None:
        entries = [(c.ell0, c.power, c.ell, c.trace_abs) for c in classification.classes]
        spec = LengthSpectrum(L, _aggregate(entries), pres.covolume, complete, meta, prims)
    else:
        base = LengthSpectrum(L, [], pres.covolume, complete, meta, prims)
        spec = lift_spectrum(base, cover, L)
    return spec


def lift_spectrum(base: LengthSpectrum, cover: CoverSpec, L: float | None = None) -> LengthSpectrum:
    """Cover spectrum from the base's primitive classes and their sheet permutations."""
    L = base.cutoff if L is None else L
    if L > base.cutoff + LENGTH_TOL:
        raise IncompleteBall("cover cutoff exceeds the base spectrum's cutoff")
    if base.records and not base.primitives:
        raise ValueError("base spectrum has no primitive class words (a spectrum read back from "
                         "CSV cannot be lifted); recompute it with length_spectrum")
    entries = []
    for ell0, word, _tr in base.primitives:
        for c in cycle_type(cover.perm_of_word(word)):
            prim = c * ell0
            m = 1
            while m * prim <= L + LENGTH_TOL:
                entries.append((prim, m, m * prim, trace_for_length(m * prim)))
                m += 1
    meta = dict(base.meta, cover=cover.name, degree=cover.degree, cutoff=L)
    prims = []
    return LengthSpectrum(L, _aggregate(entries), cover.degree * base.covolume, base.complete,
                          meta, prims)


def systole(spec: LengthSpectrum) -> float:
    if not spec.records:
        raise EmptySpectrum(spec.cutoff)
    return min(r.ell for r in spec.records)
