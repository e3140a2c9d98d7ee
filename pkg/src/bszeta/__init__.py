"""Selberg and Ihara zeta functions alongside Benjamini-Schramm statistics.

Modules: numcore (precision), hypgeom (disk geometry), fuchsian (groups,
covers, length spectra), zetageom and spectral (the two sides of the trace
formula), graphzeta (the exact graph analogue), bsstats (Monte Carlo surface
statistics), and cli/experiment for the command line.
"""
from importlib import resources

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a file shipped in bszeta/data."""
    return resources.files(__name__).joinpath("data", name)
