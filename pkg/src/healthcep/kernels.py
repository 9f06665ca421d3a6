"""Backend selection for the sample-level inner loops.

The compiled extension is preferred; set ``HEALTHCEP_PURE_PYTHON=1`` to
force the pure-Python kernels (used by the backend-parity tests and the
benchmark).
"""
import os

from healthcep import _pykernels

if os.environ.get("HEALTHCEP_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from healthcep import _ckernels as _impl
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"
    else:
        BACKEND = "cython"

sosfilt = _impl.sosfilt
zero_crossing_extrema = _impl.zero_crossing_extrema
select_peaks = _impl.select_peaks

BACKENDS = {"python": _pykernels}
try:
    from healthcep import _ckernels

    BACKENDS["cython"] = _ckernels
except ImportError:
    pass
