"""Backend dispatch for the hot kernels.

``KDVCN_BACKEND`` selects the implementation at import time: ``numba``
(default when numba imports) or ``numpy``. Both modules expose the same
functions and a solver class; the rest of the package only talks to the
names re-exported here.
"""

import os

from . import numpy_impl

_requested = os.environ.get("KDVCN_BACKEND", "").strip().lower() or "numba"
if _requested not in ("numba", "numpy"):
    raise ImportError(f"KDVCN_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

_accel = None
if _requested == "numba":
    try:
        from . import numba_impl as _accel
    except ImportError:  # numba missing: fall back silently
        _accel = None

if _accel is not None:
    BACKEND = "numba"
    impl = _accel
    LinearSolver = _accel.BandedSolver
else:
    BACKEND = "numpy"
    impl = numpy_impl
    LinearSolver = numpy_impl.FFTSolver


def get_impl(name):
    """Return the kernel module for ``name`` ('numba' or 'numpy')."""
    if name == "numpy":
        return numpy_impl
    if name == "numba":
        from . import numba_impl as mod
        return mod
    raise ValueError(f"unknown backend {name!r}")


def solver_class(name):
    return get_impl(name).BandedSolver if name == "numba" else numpy_impl.FFTSolver


__all__ = ["BACKEND", "impl", "LinearSolver", "get_impl", "solver_class", "numpy_impl"]
