"""Kernel backend selection.

``FLOODFUSE_BACKEND`` picks the implementation of the hot kernels:
``numba`` (default when numba imports) or ``numpy`` (pure array code, no JIT).
``FLOODFUSE_THREADS`` caps the numba thread pool. Both are read at call time so
tests and benchmarks can flip them per call.
"""

import os

try:
    import numba
    from numba import njit, prange

    HAS_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # The bundled TBB is often too old and warns on first parallel call.
        numba.config.THREADING_LAYER = "omp"
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

    prange = range


BACKENDS = ("numba", "numpy")


def backend():
    """Return the active kernel backend name."""
    name = os.environ.get("FLOODFUSE_BACKEND", "").strip().lower()
    if not name:
        return "numba" if HAS_NUMBA else "numpy"
    if name not in BACKENDS:
        raise ValueError(f"FLOODFUSE_BACKEND must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and not HAS_NUMBA:
        return "numpy"
    return name


def use_numba():
    if backend() != "numba":
        return False
    _apply_thread_cap()
    return True


def thread_cap():
    raw = os.environ.get("FLOODFUSE_THREADS", "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"FLOODFUSE_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise ValueError(f"FLOODFUSE_THREADS must be a positive integer, got {raw!r}")
    return n


def _apply_thread_cap():
    n = thread_cap()
    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(limit if n is None else min(n, limit))
