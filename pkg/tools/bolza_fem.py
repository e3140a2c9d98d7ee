"""Laplace eigenvalues of the Bolza surface by finite elements.

Generates the eigenvalue file shipped with bszeta.  The surface is the
Dirichlet octagon in the Poincare disk with its sides glued by the side
pairings; the hyperbolic Laplacian is conformal to the Euclidean one, so

    -Delta_hyp u = lambda u   <=>   int grad u . grad v dx = lambda int u v w dx,
    w(z) = 4 / (1 - |z|^2)^2.

Each of the eight triangles (center, V_i, V_i+1) gets a structured mesh with
n cells per edge.  Nodes on paired sides are images of each other under the
pairing, so the glued mesh is conforming.  Quadratic isoparametric elements
(the default) converge like h^4.  The shipped values come from the finest
level and the change from the previous level is recorded as the
per-eigenvalue uncertainty.  The list stops before the first eigenvalue whose
relative uncertainty exceeds --max-rel-err, at a gap in the spectrum.

usage: python3 tools/bolza_fem.py --levels 32 64 128 --nev 150 --out src/bszeta/data/bolza_eigenvalues.json
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import time

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from bszeta.fuchsian import bolza_presentation, dirichlet_domain

log = logging.getLogger("bolza_fem")

# 7-point degree-5 rule on the reference triangle (barycentric, weights sum to 1)
_A, _B = 0.059715871789770, 0.470142064105115
_C, _D = 0.797426985353087, 0.101286507323456
QUAD = np.array([
    [1 / 3, 1 / 3, 1 / 3, 0.225],
    [_A, _B, _B, 0.132394152788506], [_B, _A, _B, 0.132394152788506], [_B, _B, _A, 0.132394152788506],
    [_C, _D, _D, 0.125939180544827], [_D, _C, _D, 0.125939180544827], [_D, _D, _C, 0.125939180544827],
])


def mobius(m: np.ndarray, z):
    return (m[0, 0] * z + m[0, 1]) / (m[1, 0] * z + m[1, 1])


def klein_to_poincare(k):
    return k / (1 + np.sqrt(1 - np.abs(k) ** 2))


def poincare_to_klein(z):
    return 2 * z / (1 + np.abs(z) ** 2)


def side_maps(V: np.ndarray, elems):
    """For each side i, (j, M) with M mapping side i onto side j (orientation reversed)."""
    n = len(V)
    out = {}
    for i in range(n):
        a, b = V[i], V[(i + 1) % n]
        for g in elems:
            for M in (g.as_array(), np.linalg.inv(g.as_array())):
                fa, fb = mobius(M, a), mobius(M, b)
                for j in range(n):
                    if abs(fa - V[(j + 1) % n]) < 1e-9 and abs(fb - V[j]) < 1e-9 and j != i:
                        out[i] = (j, M)
        if i not in out:
            raise RuntimeError(f"no side pairing found for side {i}")
    return out


def build_mesh(n: int, order: int = 1):
    """Glued mesh with n cells per triangle edge; order 2 adds edge midpoints."""
    pres = bolza_presentation()
    dom = dirichlet_domain(pres)
    V = np.asarray(dom.vertices)
    ns = len(V)
    pairs = side_maps(V, dom.side_elements)
    KV = poincare_to_klein(V)

    def param(i):
        j, M = pairs[i]
        if i < j:  # master side: Klein-uniform parameter
            return lambda t: klein_to_poincare((1 - t) * KV[i] + t * KV[(i + 1) % ns])
        # slave side i is the image of its master j under the inverse pairing
        Minv = np.linalg.inv(pairs[j][1]) if pairs[j][0] == i else None
        if Minv is None:
            raise RuntimeError("pairings are not mutually inverse")
        mj = lambda t: klein_to_poincare((1 - t) * KV[j] + t * KV[(j + 1) % ns])  # noqa: E731
        # M_j maps side j to side i reversed, so P_i(t) = M_j(P_j(1 - t))
        return lambda t: mobius(pairs[j][1], mj(1 - t))

    P = [param(i) for i in range(ns)]
    N = order * n
    # global numbering on the fine grid
    ids = {}
    count = [0]

    def new():
        count[0] += 1
        return count[0] - 1

    center = new()
    vertex = new()
    ray = {(r, k): new() for r in range(ns) for k in range(1, N)}
    side = {}
    for i in range(ns):
        j = pairs[i][0]
        if i < j:
            for t in range(1, N):
                side[(i, t)] = new()
    for i in range(ns):
        j = pairs[i][0]
        if i > j:
            for t in range(1, N):
                side[(i, t)] = side[(j, N - t)]

    def gid(i, k, t):
        if k == 0:
            return center
        if k == N and t in (0, N):
            return vertex
        if t == 0:
            return ray[(i, k)]
        if t == k:
            return ray[((i + 1) % ns, k)]
        if k == N:
            return side[(i, t)]
        key = (i, k, t)
        if key not in ids:
            ids[key] = new()
        return ids[key]

    tris, coords = [], []
    for i in range(ns):
        def pos(k, t, i=i):
            if k == 0:
                return 0j
            return (k / N) * P[i](t / k)
        o = order
        for k in range(n):
            for t in range(k + 1):
                # vertices (k,t), (k+1,t), (k+1,t+1) on the coarse grid
                nodes = [(o * k, o * t), (o * k + o, o * t), (o * k + o, o * t + o)]
                if o == 2:
                    nodes += [(2 * k + 1, 2 * t), (2 * k + 2, 2 * t + 1), (2 * k + 1, 2 * t + 1)]
                tris.append(tuple(gid(i, a, b) for a, b in nodes))
                coords.append(tuple(pos(a, b) for a, b in nodes))
            for t in range(k):
                nodes = [(o * k, o * t), (o * k + o, o * t + o), (o * k, o * t + o)]
                if o == 2:
                    nodes += [(2 * k + 1, 2 * t + 1), (2 * k + 1, 2 * t + 2), (2 * k, 2 * t + 1)]
                tris.append(tuple(gid(i, a, b) for a, b in nodes))
                coords.append(tuple(pos(a, b) for a, b in nodes))
    # check the gluing: paired side nodes really are images of each other
    worst = 0.0
    for i in range(ns):
        j, M = pairs[i]
        for t in range(1, N):
            worst = max(worst, abs(mobius(M, P[i](t / N)) - P[j](1 - t / N)))
    if worst > 1e-9:
        raise RuntimeError(f"side gluing mismatch {worst}")
    return np.array(tris), np.array(coords), count[0], dom


def assemble(tris, coords, ndof):
    z1, z2, z3 = coords[:, 0], coords[:, 1], coords[:, 2]
    x = np.stack([z1.real, z2.real, z3.real], 1)
    y = np.stack([z1.imag, z2.imag, z3.imag], 1)
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = np.abs(det) / 2
    # gradients of barycentric coordinates
    bx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], 1) / det[:, None]
    by = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], 1) / det[:, None]
    Ke = area[:, None, None] * (bx[:, :, None] * bx[:, None, :] + by[:, :, None] * by[:, None, :])
    Me = np.zeros_like(Ke)
    for l1, l2, l3, wq in QUAD:
        lam = np.array([l1, l2, l3])
        zq = l1 * z1 + l2 * z2 + l3 * z3
        w = 4 / (1 - np.abs(zq) ** 2) ** 2
        Me += (wq * area * w)[:, None, None] * np.outer(lam, lam)[None]
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(ndof, ndof))
    M = sp.csr_matrix((Me.ravel(), (rows, cols)), shape=(ndof, ndof))
    return K, M, float(Me.sum())


def _p2_shape(xi, eta):
    """P2 shape functions and reference gradients at one point."""
    l0, l1, l2 = 1 - xi - eta, xi, eta
    phi = np.array([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0])
    dxi = np.array([-(4 * l0 - 1), 4 * l1 - 1, 0.0, 4 * (l0 - l1), 4 * l2, -4 * l2])
    deta = np.array([-(4 * l0 - 1), 0.0, 4 * l2 - 1, -4 * l1, 4 * l1, 4 * (l0 - l2)])
    return phi, dxi, deta


def assemble_p2(tris, coords, ndof):
    """Isoparametric quadratic elements: geometry and basis share the six nodes."""
    x, y = coords.real, coords.imag  # (E, 6)
    E = len(tris)
    Ke = np.zeros((E, 6, 6))
    Me = np.zeros((E, 6, 6))
    for l0, l1, l2, wq in QUAD:
        phi, dxi, deta = _p2_shape(l1, l2)
        xx, yx = x @ dxi, y @ dxi
        xe, ye = x @ deta, y @ deta
        det = xx * ye - xe * yx
        # physical gradients: J^-T (dxi, deta)
        gx = (ye[:, None] * dxi[None] - yx[:, None] * deta[None]) / det[:, None]
        gy = (-xe[:, None] * dxi[None] + xx[:, None] * deta[None]) / det[:, None]
        jw = 0.5 * wq * np.abs(det)
        Ke += jw[:, None, None] * (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :])
        zq = coords @ phi
        w = 4 / (1 - np.abs(zq) ** 2) ** 2
        Me += (jw * w)[:, None, None] * np.outer(phi, phi)[None]
    rows = np.repeat(tris, 6, axis=1).ravel()
    cols = np.tile(tris, (1, 6)).ravel()
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(ndof, ndof))
    M = sp.csr_matrix((Me.ravel(), (rows, cols)), shape=(ndof, ndof))
    return K, M, float(Me.sum())


def solve(n: int, nev: int, order: int = 1):
    t0 = time.perf_counter()
    tris, coords, ndof, dom = build_mesh(n, order)
    K, M, vol = (assemble_p2 if order == 2 else assemble)(tris, coords, ndof)
    vals = eigsh(K, k=nev, M=M, sigma=-0.5, which="LM", return_eigenvectors=False)
    vals = np.sort(vals)
    log.info("n=%d dof=%d area=%.8f (exact %.8f) time %.1fs", n, ndof, vol, 4 * math.pi,
             time.perf_counter() - t0)
    return vals, ndof, vol


def finest_with_error(vs):
    """Finest-level values; the change from the previous level bounds their error
    as long as each refinement at least halves it."""
    return vs[-1], np.abs(vs[-1] - vs[-2])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--nev", type=int, default=150)
    ap.add_argument("--order", type=int, choices=(1, 2), default=2)
    ap.add_argument("--max-rel-err", type=float, default=2e-3,
                    help="stop the shipped list before the first eigenvalue less accurate than this")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    runs = [solve(n, args.nev, args.order) for n in args.levels]
    vs = [r[0] for r in runs]
    if len(vs) < 2:
        ap.error("need at least two refinement levels")
    ext, err = finest_with_error(vs)
    err = np.maximum(err, 1e-9 * np.maximum(1.0, np.abs(ext)))
    keep = 1
    while keep < args.nev - 1 and err[keep] <= args.max_rel_err * ext[keep]:
        keep += 1
    # end the list at a gap so no multiplet is cut in half
    while keep > 2 and ext[keep] - ext[keep - 1] < 1e-3 * ext[keep]:
        keep -= 1
    order = np.argsort(ext[1:keep], kind="stable") + 1
    lam = [0.0] + [float(ext[i]) for i in order]
    errs = [0.0] + [float(err[i]) for i in order]
    obj = {
        "vol": 4 * math.pi,
        "lambdas": lam,
        "lambda_err": errs,
        "source": ("bszeta tools/bolza_fem.py: Lagrange finite elements on the glued Dirichlet octagon, "
                   f"order {args.order}, levels {args.levels}; values from the finest level, "
                   "lambda_err = change from the previous level"),
        "method": {"order": args.order, "levels": args.levels, "dofs": [r[1] for r in runs], "mesh_area": [r[2] for r in runs],
                   "previous_level": [float(x) for x in vs[-2][:keep]]},
    }
    with open(args.out, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")
    log.info("shipping %d eigenvalues up to %.4f", keep, lam[-1])
    for j in range(min(12, keep)):
        log.info("lambda_%d = %.10f +- %.2e (raw %s)", j, ext[j], err[j],
                 " ".join(f"{v[j]:.8f}" for v in vs))


if __name__ == "__main__":
    main()
