"""Trellis kernel backend selection.

The compiled extension is preferred when present; the NumPy fallback keeps
the package fully functional without a compiler. ``AOICOOP_KERNEL=python``
or ``AOICOOP_KERNEL=cython`` forces a backend (the latter raises if the
extension was not built). ``available_backends()`` exposes both for parity
tests and benchmarks.
"""

import os

from . import _trellis_py

_FORCE = os.environ.get("AOICOOP_KERNEL", "").strip().lower()

_cy = None
if _FORCE != "python":
    try:
        from . import _trellis_cy as _cy
    except ImportError:
        _cy = None
    if _FORCE == "cython" and _cy is None:
        raise ImportError(
            "AOICOOP_KERNEL=cython but the compiled trellis kernels are not built"
        )

_impl = _cy if _cy is not None else _trellis_py

BACKEND = _impl.BACKEND_NAME
conv_encode = _impl.conv_encode
viterbi_decode = _impl.viterbi_decode


def available_backends():
    """Importable kernel modules keyed by backend name."""
    backends = {"python": _trellis_py}
    if _cy is not None:
        backends["cython"] = _cy
    else:
        try:
            from . import _trellis_cy
            backends["cython"] = _trellis_cy
        except ImportError:
            pass
    return backends
