"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``GAPMODES_PURE_PYTHON`` is set to a non-empty value
other than ``0``) the numpy fallback is used. ``BACKEND`` names the choice.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_force_py = os.environ.get("GAPMODES_PURE_PYTHON", "") not in ("", "0")

_impl = _pykernels
BACKEND = "python"
if not _force_py:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pykernels


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def sturm_count(diag, off2, E, pivmin=1e-300):
    """Eigenvalues strictly below ``E`` of a symmetric tridiagonal matrix."""
    return int(_impl.sturm_count(_c(diag), _c(off2), float(E), float(pivmin)))


def sturm_count_many(diag, off2, shifts, pivmin=1e-300):
    return np.asarray(_impl.sturm_count_many(_c(diag), _c(off2), _c(shifts), float(pivmin)),
                      dtype=np.int64)


def magnus_transfer(v1, v2, h, E):
    """Transfer matrix over all steps and its derivative with respect to E."""
    return _impl.magnus_transfer(_c(v1), _c(v2), float(h), float(E))


def magnus_orbit(v1, v2, h, E, y0, yp0):
    return _impl.magnus_orbit(_c(v1), _c(v2), float(h), float(E), float(y0), float(yp0))
