"""Backend selection for the convolution kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded. Both produce bit-identical results, so the choice only
affects speed. ``use_backend`` switches explicitly (tests and benchmarks).
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_active = _pykernels
backend = "python"


def available_backends():
    return sorted(_BACKENDS)


def use_backend(name):
    """Select ``"cython"`` or ``"python"`` kernels for subsequent calls."""
    global _active, backend
    if name not in _BACKENDS:
        raise ValueError(f"kernel backend {name!r} unavailable; have {available_backends()}")
    _active = _BACKENDS[name]
    backend = name


def im2col(xp, k, row0, row1):
    return _active.im2col(xp, k, row0, row1)


def col2im_add(col, dxp, k, row0, row1):
    _active.col2im_add(col, dxp, k, row0, row1)


def shift_sum(z, out):
    _active.shift_sum(z, out)


def shift_spread(g, dz):
    _active.shift_spread(g, dz)


if os.environ.get("PATCHCS_PURE_PYTHON") != "1" and _ckernels is not None:
    use_backend("cython")
