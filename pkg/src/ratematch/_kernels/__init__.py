"""Kernel backend selection.

The compiled Cython module is preferred; the pure-Python reference module
is the fallback. ``RATEMATCH_BACKEND=reference`` forces the fallback (used
by the benchmark and the backend-equivalence tests).
"""

import os

from ratematch._kernels import reference


def _select():
    if os.environ.get("RATEMATCH_BACKEND", "").lower() == "reference":
        return reference
    try:
        from ratematch._kernels import compiled
    except ImportError:
        return reference
    return compiled


active = _select()


def get_backend(name):
    """Return a kernel module by name ('compiled' or 'reference')."""
    if name == "reference":
        return reference
    if name == "compiled":
        from ratematch._kernels import compiled

        return compiled
    raise ValueError(f"unknown kernel backend: {name!r}")
