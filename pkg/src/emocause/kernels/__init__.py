"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The active backend is chosen once at import time:

* ``EMOCAUSE_BACKEND=numba``  force the numba kernels (error if missing)
* ``EMOCAUSE_BACKEND=numpy``  force the pure-numpy fallback
* unset                       numba when importable, numpy otherwise

Both backends implement the same functions with identical array contracts;
see ``numpy_backend`` for the contract documentation. ``get_backend`` gives
direct access to either implementation (used by the equivalence tests and
the benchmark under ``benchmarks/``).
"""

import importlib
import os

ENV_VAR = "EMOCAUSE_BACKEND"
_BACKENDS = ("numba", "numpy")


def numba_available() -> bool:
    try:
        importlib.import_module("numba")
    except ImportError:
        return False
    return True


def _select_backend() -> str:
    choice = os.environ.get(ENV_VAR, "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not numba_available():
            raise RuntimeError(f"{ENV_VAR}=numba requested but numba is not importable")
        return "numba"
    if choice == "":
        return "numba" if numba_available() else "numpy"
    raise ValueError(f"{ENV_VAR} must be 'numba' or 'numpy', got {choice!r}")


def get_backend(name: str):
    """Return the kernel module for an explicit backend name."""
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}, expected one of {_BACKENDS}")
    return importlib.import_module(f"{__name__}.{name}_backend")


ACTIVE_BACKEND = _select_backend()

_impl = get_backend(ACTIVE_BACKEND)

basic_forward = _impl.basic_forward
basic_backward = _impl.basic_backward
convms_forward = _impl.convms_forward
convms_backward = _impl.convms_backward
skipgram_pairs = _impl.skipgram_pairs

__all__ = [
    "ACTIVE_BACKEND",
    "ENV_VAR",
    "basic_forward",
    "basic_backward",
    "convms_forward",
    "convms_backward",
    "skipgram_pairs",
    "get_backend",
    "numba_available",
]
