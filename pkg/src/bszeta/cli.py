"""bszeta: zeta functions and local statistics along towers of surfaces and graphs.

Exit codes: 0 success, 1 validation failure, 2 budget or acceptance failure,
3 resource budget exceeded.  ``BSZETA_THREADS`` caps worker threads.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from . import fuchsian, graphzeta
from .bsstats import RejectionBudgetExceeded, bs_estimate, orbit_estimate, sample_profile, stats_ball
from .experiment import load_config, resolve_data, run_convergence_experiment, verify_identity
from .io import STATS_COLUMNS, read_spectrum, table_to_text, write_spectrum
from .numcore import PrecisionExhausted, working_precision
from .spectral import hkp_bound_check, load_eigenvalues, spectral_ds, spectral_ds2
from .zetageom import ds2_log_deriv, ds_log_deriv, log_deriv, tail_bound

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_RESOURCE = 0, 1, 2, 3

log = logging.getLogger("bszeta")


def _complex(text: str) -> complex | float:
    z = complex(text.replace(" ", ""))
    return z.real if z.imag == 0 else z


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_group_validate(args) -> int:
    pres = fuchsian.load_group(resolve_data(args.group))
    covol = fuchsian.validate_group(pres)
    print(f"group {pres.name or args.group}: genus {pres.genus}, covolume {covol!r}, relator trivial")
    if args.domain:
        dom = fuchsian.dirichlet_domain(pres)
        print(f"dirichlet domain: {len(dom.vertices)} vertices, area {dom.area!r}, "
              f"circumradius {dom.circumradius!r}")
    for c in args.cover or []:
        cov = fuchsian.load_cover(resolve_data(c))
        cov.validate(pres)
        print(f"cover {cov.name or c}: degree {cov.degree}, valid")
    return EXIT_OK


def cmd_spectrum_compute(args) -> int:
    pres = fuchsian.load_group(resolve_data(args.group))
    cover = fuchsian.load_cover(resolve_data(args.cover)) if args.cover else None
    spec = fuchsian.length_spectrum(pres, args.cutoff, cover=cover, max_elements=args.max_elements)
    if args.out:
        write_spectrum(spec, args.out)
    else:
        from .io import spectrum_to_text
        sys.stdout.write(spectrum_to_text(spec))
    try:
        log.info("systole %r, %d classes", fuchsian.systole(spec), spec.class_count())
    except fuchsian.EmptySpectrum as exc:
        log.info("%s", exc)
    return EXIT_OK if spec.complete else EXIT_BUDGET


def cmd_zeta_eval(args) -> int:
    spec = read_spectrum(resolve_data(args.spectrum))
    fn = {"log_deriv": log_deriv, "ds": ds_log_deriv, "ds2": ds2_log_deriv}[args.quantity]
    rows = []
    for s in args.s:
        v = complex(fn(spec, s, shift=args.shift))
        tb = tail_bound(spec, s, shift=args.shift) if args.quantity == "log_deriv" else float("nan")
        rows.append((repr(s), v.real, v.imag, tb))
    meta = {"quantity": args.quantity, "shift": args.shift, "cutoff": spec.cutoff, "covolume": spec.covolume}
    _emit(table_to_text(("s", "value_re", "value_im", "tail_bound"), rows, meta), args.out)
    return EXIT_OK


def cmd_spectral_eval(args) -> int:
    data = load_eigenvalues(resolve_data(args.eigen))
    rows = []
    for s in args.s:
        a, b = spectral_ds(data, s), spectral_ds2(data, s)
        rows.append((s, a.value, a.tail, b.value, b.tail))
    C = args.hkp_C if args.hkp_C is not None else load_config().hkp_C
    hkp_ok, hkp_T = hkp_bound_check(data, C)
    meta = {"vol": data.vol, "n_eigenvalues": len(data.lambdas), "lambda_max": data.lambda_max,
            "hkp_C": C, "hkp_ok": hkp_ok, "hkp_T": hkp_T}
    _emit(table_to_text(("s", "ds", "ds_tail", "ds2", "ds2_tail"), rows, meta), args.out)
    return EXIT_OK if hkp_ok else EXIT_BUDGET


def cmd_identity_verify(args) -> int:
    spec = read_spectrum(resolve_data(args.spectrum))
    data = load_eigenvalues(resolve_data(args.eigen))
    results = verify_identity(spec, data, args.s, args.b)
    rows = [(r.s, r.b, r.lhs, r.rhs, r.residual, r.budget, "yes" if r.ok else "no") for r in results]
    cols = ("s", "b", "lhs", "rhs", "residual", "budget", "within_budget")
    _emit(table_to_text(cols, rows, {"cutoff": spec.cutoff, "vol": data.vol}), args.out)
    return EXIT_OK if all(r.ok for r in results) else EXIT_BUDGET


def cmd_bs_estimate(args) -> int:
    pres = fuchsian.load_group(resolve_data(args.group))
    cover = fuchsian.load_cover(resolve_data(args.cover)) if args.cover else None
    if cover is not None:
        cover.validate(pres)
    R_grid, c_grid = args.R or [], args.c or []
    if not R_grid and not c_grid:
        raise ValueError("give at least one --R or --c")
    ball = stats_ball(pres, max([2 * R for R in R_grid] + c_grid))
    prof = sample_profile(pres, ball, args.n_samples, args.seed, cover=cover, R_grid=R_grid,
                          c_grid=c_grid, threads=args.threads)
    k = cover.degree if cover else 1
    rows = []
    for R in R_grid:
        e = bs_estimate(prof, R)
        rows.append((k, "bs_probability", R, e.p_hat, (e.ci95[1] - e.ci95[0]) / 2, e.n, args.seed))
    for j, c in enumerate(c_grid):
        e = orbit_estimate(prof, j)
        rows.append((k, "orbit_count", c, e.value, 1.96 * e.stderr, e.n, args.seed))
    _emit(table_to_text(STATS_COLUMNS, rows, {"group": args.group, "cover": args.cover or ""}), args.out)
    return EXIT_OK


def cmd_graph_generate(args) -> int:
    g = graphzeta.random_regular_graph(args.n, args.d, args.seed)
    if args.out:
        graphzeta.write_edge_list(g, args.out)
    else:
        sys.stdout.write("".join(f"{u} {v}\n" for u, v in g.edges))
    return EXIT_OK


def cmd_graph_zeta(args) -> int:
    g = graphzeta.read_edge_list(args.graph)
    u = Fraction(args.u)
    res = graphzeta.log_deriv_ihara(g, u, args.m_max)
    out = {"n": g.n, "m": g.m, "u": str(u), "m_max": args.m_max, "walk_counts": res.counts,
           "log_deriv": str(res.value), "log_deriv_float": float(res.value),
           "per_vertex": float(res.value) / g.n, "tail_bound": float(res.tail_bound)}
    if args.bass:
        out["inv_zeta_bass"] = str(graphzeta.ihara_inv_bass(g, u))
    _emit(json.dumps(out, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_graph_bs(args) -> int:
    g = graphzeta.read_edge_list(args.graph)
    rows = [(R, graphzeta.tree_ball_fraction(g, R)) for R in args.R]
    _emit(table_to_text(("R", "tree_ball_fraction"), rows, {"n": g.n, "m": g.m}), args.out)
    return EXIT_OK


CONFIG_FLAGS = ("group", "cover_kind", "degrees", "cutoff", "s_grid", "R_grid", "c_grid", "n_samples",
                "seed", "graph_n", "graph_seeds", "graph_u", "graph_m_max", "graph_R", "threads", "output",
                "precision_bits", "dedup_tol")


def cmd_experiment_run(args) -> int:
    overrides = {k: getattr(args, k) for k in CONFIG_FLAGS if getattr(args, k, None) is not None}
    cfg = load_config(args.config, overrides)
    manifest = run_convergence_experiment(cfg)
    print(f"experiment {manifest['status']} in {manifest['wall_time_s']:.1f} s; outputs in {cfg.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bszeta", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"bszeta {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--precision-bits", type=int, default=None)
    ap.add_argument("--dedup-tol", type=float, default=None)
    top = ap.add_subparsers(dest="area", required=True)

    grp = top.add_parser("group").add_subparsers(dest="action", required=True)
    p = grp.add_parser("validate", help="check a group file (and optional covers)")
    p.add_argument("group")
    p.add_argument("--cover", action="append")
    p.add_argument("--domain", action="store_true", help="also certify the Dirichlet domain")
    p.set_defaults(func=cmd_group_validate)

    spc = top.add_parser("spectrum").add_subparsers(dest="action", required=True)
    p = spc.add_parser("compute", help="truncated length spectrum as CSV")
    p.add_argument("--group", default="bolza.json")
    p.add_argument("--cover")
    p.add_argument("--cutoff", type=float, required=True)
    p.add_argument("--max-elements", type=int, default=400000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum_compute)

    zt = top.add_parser("zeta").add_subparsers(dest="action", required=True)
    p = zt.add_parser("eval", help="Selberg zeta log-derivative or its D_s transforms")
    p.add_argument("--spectrum", required=True)
    p.add_argument("--s", type=_complex, action="append", required=True)
    p.add_argument("--quantity", choices=("log_deriv", "ds", "ds2"), default="log_deriv")
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_zeta_eval)

    sp = top.add_parser("spectral").add_subparsers(dest="action", required=True)
    p = sp.add_parser("eval", help="spectral-side D_s sums from eigenvalue data")
    p.add_argument("--eigen", required=True)
    p.add_argument("--s", type=float, action="append", required=True)
    p.add_argument("--hkp-C", type=float, help="eigenvalue counting constant (default from config)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectral_eval)

    idt = top.add_parser("identity").add_subparsers(dest="action", required=True)
    p = idt.add_parser("verify", help="trace-formula identity residuals against budgets")
    p.add_argument("--spectrum", required=True)
    p.add_argument("--eigen", required=True)
    p.add_argument("--s", type=float, action="append", required=True)
    p.add_argument("--b", type=float, default=3.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_identity_verify)

    bs = top.add_parser("bs").add_subparsers(dest="action", required=True)
    p = bs.add_parser("estimate", help="Monte Carlo BS probability and orbit counts")
    p.add_argument("--group", default="bolza.json")
    p.add_argument("--cover")
    p.add_argument("--R", type=float, action="append")
    p.add_argument("--c", type=float, action="append")
    p.add_argument("--n-samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bs_estimate)

    gr = top.add_parser("graph").add_subparsers(dest="action", required=True)
    p = gr.add_parser("generate", help="random regular graph from the pairing model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph_generate)
    p = gr.add_parser("zeta", help="exact Ihara log-derivative series")
    p.add_argument("--graph", required=True)
    p.add_argument("--u", default="1/4")
    p.add_argument("--m-max", type=int, default=16)
    p.add_argument("--bass", action="store_true", help="also print 1/zeta(u) from the Bass formula")
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph_zeta)
    p = gr.add_parser("bs", help="fraction of vertices whose R-ball is not a tree")
    p.add_argument("--graph", required=True)
    p.add_argument("--R", type=int, action="append", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph_bs)

    ex = top.add_parser("experiment").add_subparsers(dest="action", required=True)
    p = ex.add_parser("run", help="convergence experiment over covers and graphs")
    p.add_argument("--config")
    p.add_argument("--group")
    p.add_argument("--cover-kind", choices=("cyclic", "permutation-seeded"))
    p.add_argument("--degrees", type=int, nargs="*")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--s-grid", type=float, nargs="+")
    p.add_argument("--R-grid", type=float, nargs="+")
    p.add_argument("--c-grid", type=float, nargs="+")
    p.add_argument("--n-samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--graph-n", type=int, nargs="*")
    p.add_argument("--graph-seeds", type=int, nargs="+")
    p.add_argument("--graph-u")
    p.add_argument("--graph-m-max", type=int)
    p.add_argument("--graph-R", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_experiment_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with working_precision(args.precision_bits, args.dedup_tol):
            return args.func(args)
    except (fuchsian.BudgetExceeded, graphzeta.BudgetExceeded, RejectionBudgetExceeded,
            PrecisionExhausted, MemoryError) as exc:
        print(f"bszeta: resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except fuchsian.IncompleteBall as exc:
        print(f"bszeta: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"bszeta: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
