"""Batch and online plug-and-play image reconstruction.

Solvers (ISTA/FISTA, ADMM, PnP-ISTA, PnP-ADMM, PnP-SGD), averagedness
certificates for denoisers, fixed-point diagnostics, and a first-Born
diffraction tomography measurement simulator.
"""

from pnp_online.errors import ConfigurationError, DivergenceError

__all__ = ["ConfigurationError", "DivergenceError"]

__version__ = "0.1.0"
