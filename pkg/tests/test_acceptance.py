"""Acceptance criteria, one test per criterion.

Each test is tagged ``criterion(n, title)``; conftest prints a PASS/FAIL/SKIP
line per criterion at the end of the run, with the details each test records.
"""
import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from bszeta import data_path
from bszeta.experiment import load_config, run_convergence_experiment, verify_identity
from bszeta.fuchsian import ConjClassRecord, LengthSpectrum, length_spectrum
from bszeta.graphzeta import (cycle_graph, divisor_walk_counts, ihara_inv_bass, nb_det, nb_walk_counts,
                              primitive_cycle_census, random_min_degree2_graph)
from bszeta.io import read_spectrum, read_table, write_spectrum
from bszeta.spectral import SpectralData, load_eigenvalues, spectral_ds, spectral_ds2
from bszeta.zetageom import ds2_log_deriv, ds_log_deriv, lemma_check, log_deriv, tail_bound

from oracles import conjugation_oracle

SYS = 2 * math.acosh(1 + math.sqrt(2))


def graph_corpus():
    """60 random connected graphs with minimum degree 2 and 4 <= n <= 10."""
    rng = np.random.default_rng(20260101)
    out = []
    for j in range(60):
        n = int(rng.integers(4, 11))
        extra = int(rng.integers(0, min(6, n * (n - 1) // 2 - n) + 1))
        out.append(random_min_degree2_graph(n, extra, seed=1000 + j))
    return out


def synthetic_spectra(count, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        recs = []
        for _ in range(int(rng.integers(1, 30))):
            ell0, m = float(rng.uniform(0.4, 5.0)), int(rng.integers(1, 4))
            recs.append(ConjClassRecord(ell0, m, m * ell0, int(rng.integers(1, 100)), 2 * math.cosh(m * ell0 / 2)))
        out.append(LengthSpectrum(max(r.ell for r in recs), recs, float(rng.uniform(2, 60)), True))
    return out


def fd(f, s, h):
    """Fourth-order central difference."""
    return (8 * (f(s + h) - f(s - h)) - (f(s + 2 * h) - f(s - 2 * h))) / (12 * h)


# -- shared runs for criteria 7, 8 and 10 -------------------------------------

def _run(out, threads, **over):
    cfg = load_config(overrides=dict(over, output=str(out), threads=threads))
    t0 = time.perf_counter()
    manifest = run_convergence_experiment(cfg)
    return manifest, time.perf_counter() - t0


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    return {"root": tmp_path_factory.mktemp("acceptance")}


COVER_RUN = dict(degrees=[1, 2, 3, 4], graph_n=[])


@pytest.fixture(scope="module")
def cover_run(runs):
    out = runs["root"] / "covers_t1"
    manifest, wall = _run(out, 1, **COVER_RUN)
    return out, manifest, wall


@pytest.fixture(scope="module")
def headline_run(runs):
    out = runs["root"] / "headline_t1"
    manifest, wall = _run(out, 1)
    return out, manifest, wall


def _seq(out):
    _, _, rows = read_table(Path(out) / "surface_sequence.csv")
    table = {}
    for k, q, p, est, unc, *_ in rows:
        table[(int(k), q, p)] = (float(est), float(unc))
    return table


# -- criteria -----------------------------------------------------------------

@pytest.mark.criterion(1, "Bass formula equals the non-backtracking determinant")
def test_criterion_1_graph_oracle(record_property):
    t0 = time.perf_counter()
    corpus = graph_corpus()
    assert len(corpus) >= 50
    assert all(g.n <= 10 and g.is_connected() and min(g.degrees()) >= 2 for g in corpus)
    us = [Fraction(1, 3), Fraction(-2, 7), Fraction(1, 2), Fraction(3, 4)]
    for g in corpus:
        for u in us:
            assert ihara_inv_bass(g, u) == nb_det(g, u)
    for n in range(3, 9):
        for u in us:
            assert ihara_inv_bass(cycle_graph(n), u) == (1 - u ** n) ** 2
            assert nb_det(cycle_graph(n), u) == (1 - u ** n) ** 2
    wall = time.perf_counter() - t0
    record_property("detail", f"{len(corpus)} graphs x {len(us)} u values, C3..C8; {wall:.1f} s")
    assert wall < 60


@pytest.mark.criterion(2, "walk counts equal divisor sums of the primitive cycle census")
def test_criterion_2_walk_census(record_property):
    t0 = time.perf_counter()
    corpus = graph_corpus()
    for g in corpus:
        census = primitive_cycle_census(g, 12)
        assert nb_walk_counts(g, 12) == divisor_walk_counts(census, 12)
    wall = time.perf_counter() - t0
    record_property("detail", f"{len(corpus)} graphs, m <= 12; {wall:.1f} s")
    assert wall < 120


@pytest.mark.criterion(3, "Bolza length spectrum to L = 6 with systole and conjugation oracle")
def test_criterion_3_bolza_pipeline(bolza, runs, record_property):
    t0 = time.perf_counter()
    spec = length_spectrum(bolza, 6.0)
    wall = time.perf_counter() - t0
    assert spec.complete and not spec.meta["warnings"]
    assert spec.meta["separation"] > 0
    shortest = spec.records[0]
    assert abs(shortest.ell - SYS) <= 1e-9
    oracle = conjugation_oracle(bolza, None, 3.1, 3, 2)
    assert oracle == [(round(SYS, 6), shortest.multiplicity)]
    write_spectrum(spec, runs["root"] / "bolza_L6_a.csv")
    record_property("detail", f"systole error {abs(shortest.ell - SYS):.1e}, shortest multiplicity "
                              f"{shortest.multiplicity} (oracle {oracle[0][1]}), {spec.class_count()} classes; "
                              f"{wall:.1f} s")
    assert wall < 600


@pytest.mark.criterion(4, "Dirichlet-series lemma on every shipped spectrum")
def test_criterion_4_lemma(record_property):
    files = sorted(p for p in data_path("").iterdir() if p.name.endswith(".csv"))
    assert files
    margins = []
    for p in files:
        spec = read_spectrum(str(p))
        for s in (1.1, 1.5, 2.0, 3.0):
            lhs, rhs, ok = lemma_check(spec, s)
            assert ok, (p.name, s, lhs, rhs)
            margins.append((lhs - rhs) / max(abs(lhs), 1e-300))
    record_property("detail", f"{len(files)} spectra x 4 s values; min relative margin {min(margins):.3g}")


@pytest.mark.criterion(5, "derivative identities against finite differences")
def test_criterion_5_derivatives(record_property):
    spectra = synthetic_spectra(24, seed=5)
    worst1 = worst2 = worst3 = 0.0
    for spec in spectra:
        for s in (1.2, 1.5, 2.0, 3.0):
            h = 1e-3
            d1 = -fd(lambda x: log_deriv(spec, x) / x, s, h)
            d2 = -fd(lambda x: ds_log_deriv(spec, x) / x, s, h)
            e1 = abs(ds_log_deriv(spec, s) - d1) / abs(d1)
            e2 = abs(ds2_log_deriv(spec, s) - d2) / abs(d2)
            worst1, worst2 = max(worst1, e1), max(worst2, e2)
            assert e1 <= 1e-6 and e2 <= 1e-5
    rng = np.random.default_rng(55)
    for _ in range(20):
        lam = np.sort(np.concatenate([[0.0], rng.uniform(0.1, 150.0, int(rng.integers(0, 60)))]))
        data = SpectralData(lam.tolist(), float(rng.uniform(2, 60)))
        for s in (0.8, 1.0, 1.5, 2.0, 3.0):
            d = -fd(lambda x: spectral_ds(data, x).value / x, s, 1e-3 * s)
            e3 = abs(spectral_ds2(data, s).value - d) / abs(d)
            worst3 = max(worst3, e3)
            assert e3 <= 1e-6
    record_property("detail", f"max rel err D_s {worst1:.1e}, D_s^2 {worst2:.1e}, spectral {worst3:.1e}")


@pytest.mark.criterion(6, "tail bound covers the change from L = 5 to L = 6")
def test_criterion_6_tail_bound(spec6, record_property):
    parts = []
    for s in (1.5, 2.0):
        lo = spec6.truncate(5.0)
        diff = abs(log_deriv(spec6, s) - log_deriv(lo, s))
        bound = tail_bound(lo, s)
        assert diff <= bound
        parts.append(f"s={s}: {diff:.4g} <= {bound:.4g}")
    record_property("detail", "; ".join(parts))


@pytest.mark.criterion(7, "cyclic covers of degree 2, 3, 4 stay below the base")
def test_criterion_7_cover_monotonicity(cover_run, record_property):
    out, manifest, wall = cover_run
    assert manifest["status"] == "ok"
    t = _seq(out)
    parts = []
    for k in (2, 3, 4):
        for s in ("1.5", "2.0"):
            base, base_tail = t[(1, "normalized_log_deriv", s)]
            cov, cov_tail = t[(k, "normalized_log_deriv", s)]
            assert cov <= base + base_tail + cov_tail
        base, base_unc = t[(1, "orbit_count", "3.2")]
        cov, cov_unc = t[(k, "orbit_count", "3.2")]
        sigma = math.hypot(base_unc, cov_unc) / 1.96
        assert cov <= base + 3 * sigma
        parts.append(f"k={k}: orbit {cov:.4g} vs {base:.4g}")
    record_property("detail", "; ".join(parts) + f"; {wall:.0f} s")


@pytest.mark.criterion(8, "cover and graph sequences are non-increasing")
def test_criterion_8_headline(headline_run, record_property):
    out, manifest, wall = headline_run
    assert manifest["status"] == "ok"
    cfg = manifest["config"]
    assert cfg["degrees"] == [1, 2, 4, 8] and cfg["n_samples"] == 100000
    assert cfg["graph_n"] == [64, 256, 1024, 4096] and len(cfg["graph_seeds"]) == 5
    t = _seq(out)
    seqs = {
        "zeta(s=2)": [t[(k, "normalized_log_deriv", "2.0")][0] for k in (1, 2, 4, 8)],
        "bs(R=1.6)": [t[(k, "bs_probability", "1.6")][0] for k in (1, 2, 4, 8)],
        "orbit(c=3.2)": [t[(k, "orbit_count", "3.2")][0] for k in (1, 2, 4, 8)],
    }
    _, _, med = read_table(out / "graph_medians.csv")
    seqs["graph zeta"] = [float(r[1]) for r in med]
    seqs["graph tree-ball"] = [float(r[2]) for r in med]
    for name, seq in seqs.items():
        assert all(b <= a for a, b in zip(seq, seq[1:])), (name, seq)
    record_property("detail", "; ".join(f"{n} " + ",".join(f"{v:.3g}" for v in s) for n, s in seqs.items())
                    + f"; {wall:.0f} s")
    assert wall < 1800


@pytest.mark.criterion(9, "trace-formula identity within budget on shipped eigenvalues")
def test_criterion_9_identity(spec10, record_property):
    path = data_path("bolza_eigenvalues.json")
    if not path.exists():
        pytest.skip("no shipped eigenvalue file bolza_eigenvalues.json")
    data = load_eigenvalues(str(path))
    results = verify_identity(spec10, data, [1.0, 1.5, 2.0], 3.0)
    for r in results:
        assert math.isfinite(r.budget) and abs(r.residual) <= r.budget
    record_property("detail", "; ".join(f"s={r.s}: |res| {abs(r.residual):.3g} <= {r.budget:.3g}" for r in results))


@pytest.mark.criterion(10, "bit-identical CSVs under 1 and 4 threads")
def test_criterion_10_determinism(bolza, runs, cover_run, headline_run, record_property):
    # criterion 3: recompute the spectrum and compare bytes
    a = runs["root"] / "bolza_L6_a.csv"
    if not a.exists():
        write_spectrum(length_spectrum(bolza, 6.0), a)
    b = runs["root"] / "bolza_L6_b.csv"
    write_spectrum(length_spectrum(bolza, 6.0), b)
    assert a.read_bytes() == b.read_bytes()
    compared = 1
    for (out1, m1, _), over in ((cover_run, COVER_RUN), (headline_run, {})):
        out4 = Path(str(out1).replace("_t1", "_t4"))
        m4, _ = _run(out4, 4, **over)
        assert m1["outputs"] and m1["outputs"] == m4["outputs"]
        for name in m1["outputs"]:
            assert (out1 / name).read_bytes() == (out4 / name).read_bytes(), name
            compared += 1
    record_property("detail", f"{compared} CSV files identical")
