"""Convergence experiments over cover sequences and random regular graphs."""
from __future__ import annotations

import hashlib
import json
import math
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import mpmath
import numpy as np
import scipy

from . import __version__, data_path
from .bsstats import bs_estimate, orbit_estimate, sample_profile, stats_ball
from .fuchsian import (CoverSpec, GroupPresentation, LengthSpectrum, cyclic_cover, dirichlet_domain,
                       length_spectrum, lift_spectrum, load_group, random_cover, systole,
                       trivial_cover, validate_group)
from .graphzeta import log_deriv_ihara, random_regular_graph, tree_ball_fraction
from .io import STATS_COLUMNS, write_spectrum, write_table
from .numcore import working_precision
from .spectral import IdentityResult, SpectralData, identity_residual
from .zetageom import UnfitError, normalized_log_deriv, tail_bound

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "CovolumeMismatch",
    "load_config",
    "resolve_data",
    "build_covers",
    "run_convergence_experiment",
    "verify_identity",
]


class ConfigError(ValueError):
    pass


class CovolumeMismatch(ValueError):
    pass


def resolve_data(name: str) -> Path:
    """A path as given, or else the shipped data file of that name."""
    p = Path(name)
    if p.exists():
        return p
    shipped = Path(str(data_path(name)))
    if shipped.exists():
        return shipped
    raise FileNotFoundError(name)


@dataclass
class ExperimentConfig:
    group: str = "bolza.json"
    cover_kind: str = "cyclic"  # cyclic | permutation-seeded
    degrees: list = field(default_factory=lambda: [1, 2, 4, 8])
    cover_weights: list | None = None
    cover_seed: int = 0
    cutoff: float = 6.0
    s_grid: list = field(default_factory=lambda: [1.1, 1.25, 1.5, 2.0, 3.0])
    R_grid: list = field(default_factory=lambda: [1.6])
    c_grid: list = field(default_factory=lambda: [3.2])
    n_samples: int = 100000
    seed: int = 1
    graph_n: list = field(default_factory=lambda: [64, 256, 1024, 4096])
    graph_d: int = 3
    graph_seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    graph_u: str = "1/4"
    graph_m_max: int = 16
    graph_R: int = 2
    precision_bits: int = 128
    dedup_tol: float = 1e-12
    hkp_C: float = 1.0  # eigenvalue counting constant: N(T) <= C vol T
    threads: int | None = None
    output: str = "bszeta-out"

    def validate(self) -> "ExperimentConfig":
        if self.cover_kind not in ("cyclic", "permutation-seeded"):
            raise ConfigError(f"cover_kind must be 'cyclic' or 'permutation-seeded', got {self.cover_kind!r}")
        if any(b <= a for a, b in zip(self.degrees, self.degrees[1:])):
            raise ConfigError("degrees must be strictly increasing")
        if any(int(k) < 1 for k in self.degrees):
            raise ConfigError("degrees must be positive")
        if any(not float(s) > 1 for s in self.s_grid):
            raise ConfigError("every s in s_grid must exceed 1")
        if any(not float(R) > 0 for R in self.R_grid) or any(not float(c) > 0 for c in self.c_grid):
            raise ConfigError("R_grid and c_grid entries must be positive")
        if not self.cutoff > 0:
            raise ConfigError("cutoff must be positive")
        u = Fraction(self.graph_u)
        if self.graph_n and not abs(u) * (self.graph_d - 1) < 1:
            raise ConfigError("graph_u must satisfy |u| < 1/(d - 1)")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        if not self.hkp_C > 0:
            raise ConfigError("hkp_C must be positive")
        return self

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**obj).validate()


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Shipped defaults, then the config file, then explicit overrides."""
    base = json.loads(Path(str(data_path("default_config.json"))).read_text())
    if path is not None:
        base.update(json.loads(Path(path).read_text()))
    for k, v in (overrides or {}).items():
        if v is not None:
            base[k] = v
    return ExperimentConfig.from_dict(base)


def build_covers(pres: GroupPresentation, cfg: ExperimentConfig) -> list[CoverSpec]:
    out = []
    for k in cfg.degrees:
        k = int(k)
        if k == 1:
            out.append(trivial_cover(pres))
        elif cfg.cover_kind == "cyclic":
            out.append(cyclic_cover(pres, k, weights=cfg.cover_weights))
        else:
            out.append(random_cover(pres, k, seed=cfg.cover_seed + k))
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _versions() -> dict:
    return {"bszeta": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "mpmath": mpmath.__version__, "python": platform.python_version()}


def surface_tables(pres: GroupPresentation, base: LengthSpectrum, covers: Sequence[CoverSpec],
                   cfg: ExperimentConfig, out: Path | None = None, domain=None):
    """Rows of the surface-sequence table and the statistics table."""
    seq_rows, stat_rows = [], []
    need = [2 * float(R) for R in cfg.R_grid] + [float(c) for c in cfg.c_grid]
    ball = stats_ball(pres, max(need), domain=domain) if covers and need else None
    for cov in covers:
        k = cov.degree
        spec = base if k == 1 else lift_spectrum(base, cov)
        if out is not None:
            write_spectrum(spec, out / "spectra" / f"degree_{k}.csv")
        try:
            sys_len = systole(spec)
        except ValueError:
            sys_len = math.inf
        seq_rows.append((k, "covolume", "", spec.covolume, 0.0, "", ""))
        seq_rows.append((k, "systole", "", sys_len, 0.0, "", ""))
        for s in cfg.s_grid:
            s = float(s)
            val = normalized_log_deriv(spec, s)
            try:
                budget = tail_bound(spec, s) / spec.covolume
            except UnfitError:
                budget = math.inf
            seq_rows.append((k, "normalized_log_deriv", s, val, budget, "", ""))
        if ball is None:
            continue
        prof = sample_profile(pres, ball, cfg.n_samples, cfg.seed, cover=None if k == 1 else cov,
                              R_grid=[float(R) for R in cfg.R_grid],
                              c_grid=[float(c) for c in cfg.c_grid], threads=cfg.threads)
        for R in cfg.R_grid:
            est = bs_estimate(prof, float(R))
            half = (est.ci95[1] - est.ci95[0]) / 2
            seq_rows.append((k, "bs_probability", float(R), est.p_hat, half, est.n, cfg.seed))
            stat_rows.append((k, "bs_probability", float(R), est.p_hat, half, est.n, cfg.seed))
        for j, c in enumerate(cfg.c_grid):
            est = orbit_estimate(prof, j)
            seq_rows.append((k, "orbit_count", float(c), est.value, 1.96 * est.stderr, est.n, cfg.seed))
            stat_rows.append((k, "orbit_count", float(c), est.value, 1.96 * est.stderr, est.n, cfg.seed))
    return seq_rows, stat_rows


def graph_tables(cfg: ExperimentConfig):
    u = Fraction(cfg.graph_u)
    rows = []
    for n in cfg.graph_n:
        for seed in cfg.graph_seeds:
            g = random_regular_graph(int(n), cfg.graph_d, seed=int(seed))
            ld = log_deriv_ihara(g, u, cfg.graph_m_max)
            tbf = tree_ball_fraction(g, cfg.graph_R)
            rows.append((int(n), int(seed), float(ld.value) / g.n, float(ld.tail_bound) / g.n, tbf))
    medians = []
    for n in cfg.graph_n:
        sub = [r for r in rows if r[0] == int(n)]
        medians.append((int(n), statistics.median(r[2] for r in sub), statistics.median(r[4] for r in sub)))
    return rows, medians


SEQ_COLUMNS = ("cover_degree", "quantity", "parameter", "estimate", "uncertainty", "n_samples", "seed")
GRAPH_COLUMNS = ("n", "seed", "log_deriv_per_vertex", "tail_per_vertex", "tree_ball_fraction")
MEDIAN_COLUMNS = ("n", "median_log_deriv_per_vertex", "median_tree_ball_fraction")


def run_convergence_experiment(cfg: ExperimentConfig, base_spectrum: LengthSpectrum | None = None) -> dict:
    """Run the cover and graph sequences and write tables plus a manifest.

    Returns the manifest.  On failure the manifest is still written, marked
    failed, and the exception is re-raised.
    """
    cfg.validate()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    manifest = {"status": "running", "config": asdict(cfg), "versions": _versions(),
                "precision_bits": cfg.precision_bits, "dedup_tol": cfg.dedup_tol, "outputs": {}}
    written: list[Path] = []
    header = {"version": __version__, "seed": cfg.seed, "n_samples": cfg.n_samples}
    try:
        with working_precision(cfg.precision_bits, cfg.dedup_tol):
            if cfg.degrees:
                pres = load_group(resolve_data(cfg.group))
                validate_group(pres)
                covers = build_covers(pres, cfg)
                manifest["covers"] = [c.to_json() for c in covers]
                domain = dirichlet_domain(pres)
                if base_spectrum is None:
                    base_spectrum = length_spectrum(pres, cfg.cutoff, domain=domain)
                (out / "spectra").mkdir(exist_ok=True)
                seq_rows, stat_rows = surface_tables(pres, base_spectrum, covers, cfg, out, domain)
                written += sorted((out / "spectra").glob("degree_*.csv"))
                meta = dict(header, group=cfg.group, cutoff=cfg.cutoff, complete=base_spectrum.complete)
                write_table(out / "surface_sequence.csv", SEQ_COLUMNS, seq_rows, meta)
                write_table(out / "statistics.csv", STATS_COLUMNS, stat_rows, header)
                written += [out / "surface_sequence.csv", out / "statistics.csv"]
            if cfg.graph_n:
                rows, medians = graph_tables(cfg)
                gmeta = {"version": __version__, "d": cfg.graph_d, "u": cfg.graph_u, "m_max": cfg.graph_m_max,
                         "R": cfg.graph_R, "seeds": list(cfg.graph_seeds)}
                write_table(out / "graph_sequence.csv", GRAPH_COLUMNS, rows, gmeta)
                write_table(out / "graph_medians.csv", MEDIAN_COLUMNS, medians, gmeta)
                written += [out / "graph_sequence.csv", out / "graph_medians.csv"]
        manifest["status"] = "ok"
    except BaseException as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest["wall_time_s"] = time.perf_counter() - t0
        manifest["outputs"] = {str(p.relative_to(out)): _sha256(p) for p in written if p.exists()}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=1, default=str) + "\n")
    return manifest


def verify_identity(spec: LengthSpectrum, data: SpectralData, s_grid: Sequence[float], b: float,
                    rel_tol: float = 1e-6) -> list[IdentityResult]:
    """Identity residuals and budgets at each s; covolumes must agree."""
    if abs(spec.covolume - data.vol) > rel_tol * data.vol:
        raise CovolumeMismatch(f"spectrum covolume {spec.covolume} != eigenvalue data vol {data.vol}")
    return [identity_residual(spec, data, float(s), float(b)) for s in s_grid]
