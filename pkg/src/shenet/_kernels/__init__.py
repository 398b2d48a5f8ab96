"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba implementations are used when numba imports cleanly and the
environment variable ``SHENET_DISABLE_NUMBA`` is unset (or ``0``). Both
backends expose the same functions; ``BACKEND`` names the active one.
"""
import os

from . import _numpy

_disabled = os.environ.get("SHENET_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

if _disabled:
    _impl = _numpy
else:
    try:
        from . import _numba as _impl
    except ImportError:  # numba not installed
        _impl = _numpy

BACKEND = "numba" if _impl is not _numpy else "numpy"

im2col = _impl.im2col
col2im = _impl.col2im
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
ncc_scores = _impl.ncc_scores
shift_columns = _impl.shift_columns

__all__ = [
    "BACKEND",
    "im2col",
    "col2im",
    "maxpool_forward",
    "maxpool_backward",
    "ncc_scores",
    "shift_columns",
]
