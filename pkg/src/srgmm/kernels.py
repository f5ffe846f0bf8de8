"""Backend selection for the hot kernels.

The compiled extension is used when it imports and ``SRGMM_PURE_PYTHON`` is
unset (or "0"); otherwise the numpy fallback is used. ``get_backend`` gives
explicit access to either one, which the tests and benchmark rely on.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

_BACKENDS = {"python": _kernels_py}
if _kernels_c is not None:
    _BACKENDS["compiled"] = _kernels_c


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Return the kernel module ``name`` ("compiled" or "python"), or the default."""
    if name is None:
        return _DEFAULT
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {available_backends()}") from None


if _kernels_c is not None and os.environ.get("SRGMM_PURE_PYTHON", "0") in ("", "0"):
    _DEFAULT = _kernels_c
    BACKEND = "compiled"
else:
    _DEFAULT = _kernels_py
    BACKEND = "python"
