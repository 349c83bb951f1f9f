"""Allocation kernel with a compiled fast path.

``waterfill`` uses the Cython module for power AoI costs when it was built
and falls back to numpy otherwise. Set ``AOIMECH_PURE_PYTHON=1`` to force
the fallback (useful for benchmarking and for platforms without a compiler).
"""
import os

import numpy as np

from . import _fallback
from ._fallback import M_TOL

try:
    if os.environ.get("AOIMECH_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("compiled kernel disabled by AOIMECH_PURE_PYTHON")
    from . import _core
except ImportError:
    _core = None

BACKEND = "cython" if _core is not None else "numpy"


def waterfill(phi, fmax, aoi, tol=M_TOL):
    """Aggregate rate and cheapest-first split for each row of ``phi``.

    See :func:`aoimech.kernels._fallback.waterfill` for the contract.
    """
    if _core is not None and getattr(aoi, "kind", None) == "power":
        phi = np.ascontiguousarray(np.atleast_2d(phi), dtype=np.float64)
        fmax = np.ascontiguousarray(fmax, dtype=np.float64)
        return _core.waterfill_power(phi, fmax, float(aoi.alpha), float(tol))
    return _fallback.waterfill(phi, fmax, aoi, tol)
