"""Kernel backend selection.

The hot row-wise kernels (masked softmax, pooling, moments, column
accumulation) exist twice: a compiled Cython core and a NumPy fallback.
The compiled core is preferred when importable; ``SLIMATTN_KERNELS`` forces
a choice (``py``/``cy``/``auto``).

Dense matrix products are not dispatched here: ``np.matmul`` already routes
to BLAS, which no hand-compiled loop beats, so both backends share it.
"""

from __future__ import annotations

import os

from . import _core_py


def _load():
    forced = os.environ.get("SLIMATTN_KERNELS", "auto").strip().lower()
    if forced in ("py", "python", "numpy"):
        return _core_py, "numpy"
    try:
        from . import _core_cy
    except ImportError:
        if forced in ("cy", "cython", "compiled"):
            raise ImportError(
                "SLIMATTN_KERNELS requested the compiled core but slimattn._core_cy "
                "is not built; reinstall with Cython available or unset the variable"
            ) from None
        return _core_py, "numpy"
    return _core_cy, "cython"


core, ACTIVE_BACKEND = _load()
