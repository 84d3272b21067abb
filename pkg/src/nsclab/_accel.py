"""Numba toggle.

Kernels are compiled with numba unless ``NSCLAB_DISABLE_NUMBA`` is set to a
truthy value or numba cannot be imported, in which case callers take the
vectorized numpy path instead.
"""
import os

_FLAG = os.environ.get("NSCLAB_DISABLE_NUMBA", "").strip().lower()

try:
    if _FLAG in ("1", "true", "yes", "on"):
        raise ImportError("numba disabled by NSCLAB_DISABLE_NUMBA")
    import numba as _nb
except ImportError:  # pragma: no cover - exercised by the fallback CI job
    _nb = None

HAVE_NUMBA = _nb is not None


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is active, else return it unchanged."""
    if _nb is None:
        return fn
    return _nb.njit(cache=True, nogil=True)(fn)


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
