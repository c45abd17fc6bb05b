"""Assembly kernel backend selection.

The compiled extension is preferred when it was built; otherwise the
vectorized numpy implementation is used.  Both expose the same three
functions with identical semantics (see ``_numpy`` for the reference
definitions); ``benchmarks/bench_kernels.py`` compares their throughput.
"""

from tgapod._kernels import _numpy

try:
    from tgapod._kernels import _cy as _impl

    BACKEND = "cython"
except ImportError:  # extension not built; fall back to numpy
    _impl = _numpy
    BACKEND = "python"

advection_local = _impl.advection_local
reaction_local = _impl.reaction_local
load_local = _impl.load_local


def backend_name() -> str:
    """Which kernel implementation was selected at import time."""
    return BACKEND
