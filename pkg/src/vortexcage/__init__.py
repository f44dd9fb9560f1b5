"""Vortex-pulse-driven surface current loops in a spherical-shell molecule model."""

__version__ = "0.1.0"

from . import beam, coupling, dynamics, numerics, observables, structure, units

__all__ = [
    "__version__",
    "beam",
    "coupling",
    "dynamics",
    "numerics",
    "observables",
    "structure",
    "units",
]
