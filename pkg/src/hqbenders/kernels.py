"""Kernel selection: compiled extension when available, NumPy otherwise.

Set ``HQBENDERS_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

IMPLEMENTATIONS = {"python": _fallback}

try:
    from . import _kernels

    IMPLEMENTATIONS["cython"] = _kernels
except ImportError:  # extension not built
    _kernels = None

if os.environ.get("HQBENDERS_PURE_PYTHON") or _kernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = IMPLEMENTATIONS[BACKEND]
anneal = _impl.anneal
enumerate_min = _impl.enumerate_min
