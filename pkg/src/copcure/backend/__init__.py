"""Kernel backend selection.

Two interchangeable implementations of the numeric kernels exist:

* ``numba_impl`` — ``@njit``-compiled scalar kernels (the default), and
* ``numpy_impl`` — a vectorized numpy/scipy fallback.

The active backend is chosen once at import from the ``COPCURE_BACKEND``
environment variable (``auto``, ``numba`` or ``numpy``; ``auto`` picks numba
when it imports cleanly).  ``set_backend`` swaps it at runtime, which the
test suite uses to exercise both paths.
"""

import os

from . import codes, numpy_impl

_BACKENDS = {"numpy": numpy_impl}

try:
    from . import numba_impl

    _BACKENDS["numba"] = numba_impl
    _NUMBA_OK = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _NUMBA_OK = False

kernels = None


def set_backend(name):
    """Select the kernel backend by name ('numba' or 'numpy')."""
    global kernels
    if name == "auto":
        name = "numba" if _NUMBA_OK else "numpy"
    if name not in _BACKENDS:
        raise ValueError(
            f"unknown backend {name!r}; available: {sorted(_BACKENDS)}"
        )
    kernels = _BACKENDS[name]
    return kernels


def backend_name():
    return kernels.NAME


def available_backends():
    return sorted(_BACKENDS)


set_backend(os.environ.get("COPCURE_BACKEND", "auto"))
