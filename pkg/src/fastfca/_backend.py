"""Kernel backend selection.

The hot per-frame kernels exist twice: numba-compiled loops and a pure-numpy
vectorized fallback. The ``FASTFCA_BACKEND`` environment variable picks one:

* ``numba`` — require the compiled kernels (error if numba is unavailable)
* ``numpy`` — force the pure-numpy path
* ``auto`` / unset — numba when importable, numpy otherwise

``benchmarks/backend_bench.py`` compares the two.
"""

import os
import warnings

ENV_FLAG = "FASTFCA_BACKEND"

_active = None
_active_name = None


def _load(name):
    if name == "numpy":
        from . import _kernels_numpy as mod
    elif name == "numba":
        from . import _kernels_numba as mod
    else:
        raise ValueError(f"unknown backend {name!r}; expected 'numpy' or 'numba'")
    return mod


def select_backend(name=None):
    """Select the kernel backend; ``None`` re-reads the environment flag."""
    global _active, _active_name
    if name is None:
        name = os.environ.get(ENV_FLAG, "auto").lower()
    if name == "auto":
        try:
            _active = _load("numba")
            _active_name = "numba"
        except ImportError:
            warnings.warn("numba unavailable, falling back to numpy kernels")
            _active = _load("numpy")
            _active_name = "numpy"
    else:
        _active = _load(name)
        _active_name = name
    return _active_name


def backend_name():
    if _active is None:
        select_backend()
    return _active_name


def kernels():
    """The active kernel module."""
    if _active is None:
        select_backend()
    return _active
