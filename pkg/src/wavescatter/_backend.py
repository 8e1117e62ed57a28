"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy implementation.  ``WAVESCATTER_BACKEND=numpy`` forces the fallback.
"""
import os

from . import _numpy_kernels

kernels = _numpy_kernels
if os.environ.get("WAVESCATTER_BACKEND", "").lower() != "numpy":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled

BACKEND = kernels.NAME
leapfrog1d = kernels.leapfrog1d
leapfrog3d = kernels.leapfrog3d


def get(name: str):
    """Return the kernel module by name ('cython' or 'numpy')."""
    if name == "numpy":
        return _numpy_kernels
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(name)
