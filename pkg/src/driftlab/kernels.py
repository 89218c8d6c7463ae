"""Backend selection for the hot kernels.

The compiled Cython core is preferred; the pure-numpy fallback is used
when the extension is unavailable or when ``DRIFTLAB_BACKEND=python``
is set.  Both implement identical arithmetic (see benchmarks/) so the
choice affects speed only.
"""

import os

from . import _kernels_py

_FORCED = os.environ.get("DRIFTLAB_BACKEND", "").strip().lower()

if _FORCED == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels_cy as _impl
        BACKEND = "cython"
    except ImportError:
        if _FORCED == "cython":
            raise
        _impl = _kernels_py
        BACKEND = "python"

em_chunk = _impl.em_chunk
haar_chunk = _impl.haar_chunk


def backend_name():
    return BACKEND
