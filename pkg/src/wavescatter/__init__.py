"""Numerical laboratory for inverse scattering of defocusing energy-critical waves."""
from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
