"""Integration kernels with a compiled fast path and a pure-Python fallback.

The compiled extension is used when it imports cleanly and the environment
variable ``CHIRAL_FLOQUET_DISABLE_EXT`` is unset or empty.  Both backends
expose the same two entry points with identical semantics:

``schrodinger_dopri5(...)`` and ``lindblad_dopri5(...)``.
"""

from __future__ import annotations

import os

from . import _pyref

_REQUIRED = ("schrodinger_dopri5", "lindblad_dopri5")


def _load_backend():
    if os.environ.get("CHIRAL_FLOQUET_DISABLE_EXT"):
        return _pyref, "python"
    try:
        from . import _core
    except ImportError:
        return _pyref, "python"
    if all(hasattr(_core, name) for name in _REQUIRED):
        return _core, "compiled"
    return _pyref, "python"


_backend, BACKEND_NAME = _load_backend()

schrodinger_dopri5 = _backend.schrodinger_dopri5
lindblad_dopri5 = _backend.lindblad_dopri5


def backend_name() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return BACKEND_NAME
