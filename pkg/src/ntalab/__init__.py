"""Numerical laboratory for harmonic measure and one-phase free boundaries on NTA domains."""
from ._accel import backend
from .geometry import make_domain, Domain

__version__ = "0.1.0"
__all__ = ["backend", "make_domain", "Domain", "__version__"]
