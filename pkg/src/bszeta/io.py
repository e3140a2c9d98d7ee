"""File formats: CSV tables with '#' metadata headers, JSON inputs.

Floats are written with ``repr`` so that reading a table back and writing it
again reproduces the file byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import __version__
from .fuchsian import (ConjClassRecord, CoverSpec, GroupPresentation, LengthSpectrum, group_from_json,
                       validate_group)
from .graphzeta import Graph, read_edge_list
from .spectral import SpectralData, load_eigenvalues

__all__ = [
    "SchemaError",
    "write_table",
    "read_table",
    "write_spectrum",
    "read_spectrum",
    "spectrum_to_text",
    "spectrum_from_text",
    "parse_files",
    "STATS_COLUMNS",
]

SPECTRUM_COLUMNS = ("ell0", "m", "ell", "multiplicity", "trace_abs")
STATS_COLUMNS = ("cover_degree", "statistic", "R_or_c", "estimate", "ci95", "n_samples", "seed")


class SchemaError(ValueError):
    pass


def _fmt(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, complex):
        return repr(x)
    return str(x)


def table_to_text(columns: Sequence[str], rows: Iterable[Sequence[Any]], meta: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}: {json.dumps(v, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def write_table(path, columns, rows, meta=None) -> None:
    Path(path).write_text(table_to_text(columns, rows, meta))


def table_from_text(text: str, where: str = "<text>") -> tuple[dict, list[str], list[list[str]]]:
    meta: dict = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if ":" not in body:
            raise SchemaError(f"{where}:{i + 1}: metadata line needs 'key: value'")
        k, v = body.split(":", 1)
        try:
            meta[k.strip()] = json.loads(v)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{where}:{i + 1}: bad metadata value for {k.strip()!r}: {exc}") from None
        i += 1
    rows = list(csv.reader(lines[i:]))
    if not rows:
        raise SchemaError(f"{where}: missing column header")
    return meta, rows[0], rows[1:]


def read_table(path):
    return table_from_text(Path(path).read_text(), str(path))


def spectrum_to_text(spec: LengthSpectrum) -> str:
    meta = {"covolume": spec.covolume, "cutoff": spec.cutoff, "complete": spec.complete,
            "version": spec.meta.get("version", __version__)}
    for k, v in spec.meta.items():
        if k not in meta and _jsonable(v):
            meta[k] = v
    rows = [(r.ell0, r.m, r.ell, r.multiplicity, r.trace_abs) for r in spec.records]
    return table_to_text(SPECTRUM_COLUMNS, rows, meta)


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def spectrum_from_text(text: str, where: str = "<text>") -> LengthSpectrum:
    meta, header, rows = table_from_text(text, where)
    if tuple(header) != SPECTRUM_COLUMNS:
        raise SchemaError(f"{where}: expected columns {','.join(SPECTRUM_COLUMNS)}, got {','.join(header)}")
    for key in ("covolume", "cutoff", "complete"):
        if key not in meta:
            raise SchemaError(f"{where}: missing metadata field {key!r}")
    nmeta = sum(1 for line in text.splitlines() if line.startswith("#"))
    records = []
    for j, row in enumerate(rows):
        line = nmeta + 2 + j
        if len(row) != len(SPECTRUM_COLUMNS):
            raise SchemaError(f"{where}:{line}: expected {len(SPECTRUM_COLUMNS)} fields")
        try:
            rec = ConjClassRecord(ell0=float(row[0]), m=int(row[1]), ell=float(row[2]),
                                  multiplicity=int(row[3]), trace_abs=float(row[4]))
        except ValueError as exc:
            raise SchemaError(f"{where}:{line}: {exc}") from None
        records.append(rec)
    extra = {k: v for k, v in meta.items() if k not in ("covolume", "cutoff", "complete")}
    spec = LengthSpectrum(float(meta["cutoff"]), records, float(meta["covolume"]), bool(meta["complete"]),
                          extra)
    if [(r.ell0, r.m, r.ell) for r in spec.records] != [(r.ell0, r.m, r.ell) for r in records]:
        raise SchemaError(f"{where}: records must be sorted by length")
    return spec


def write_spectrum(spec: LengthSpectrum, path) -> None:
    Path(path).write_text(spectrum_to_text(spec))


def read_spectrum(path) -> LengthSpectrum:
    return spectrum_from_text(Path(path).read_text(), str(path))


def parse_files(paths: Sequence) -> list:
    """Parse and validate input files by extension and content."""
    out = []
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise FileNotFoundError(p)
        if p.suffix == ".csv":
            out.append(read_spectrum(p))
        elif p.suffix in (".txt", ".edges"):
            out.append(read_edge_list(p))
        elif p.suffix == ".json":
            try:
                obj = json.loads(p.read_text())
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{p}: {exc}") from None
            if "generators" in obj:
                pres = group_from_json(obj)
                validate_group(pres)
                out.append(pres)
            elif "images" in obj:
                out.append(CoverSpec.from_json(obj))
            elif "lambdas" in obj:
                out.append(load_eigenvalues(p))
            else:
                raise SchemaError(f"{p}: unrecognized JSON document")
        else:
            raise SchemaError(f"{p}: unknown file type {p.suffix!r}")
    return out
