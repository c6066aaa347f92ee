"""Backend selection: compiled Cython kernels with a numpy fallback.

The compiled extension is preferred when importable; set
``QGAUSS_PURE=1`` to force the pure backend.  Both backends implement
the same contracts; the assemblies differ only in floating-point
summation order (agreement ~1e-12, tested).
"""

from __future__ import annotations

import os

from . import _kernels_py

_FORCE_PURE = os.environ.get("QGAUSS_PURE", "") not in ("", "0")

if not _FORCE_PURE:
    try:
        from . import _kernels  # type: ignore[attr-defined]
        _impl = _kernels
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "pure"
else:
    _impl = _kernels_py
    BACKEND = "pure"

crossing_histogram = _impl.crossing_histogram
weighted_moment_sum = _impl.weighted_moment_sum
assemble_standard = _impl.assemble_standard

# Single-implementation helpers (not backend-switched).
hermitian_std_from_key = _kernels_py.hermitian_std_from_key
embed_view = _kernels_py.embed_view


def has_compiled() -> bool:
    return BACKEND == "compiled"
