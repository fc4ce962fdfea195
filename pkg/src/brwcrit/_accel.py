"""Backend switch for the compiled kernels.

Set ``BRWCRIT_NUMBA=0`` before import to run every hot loop through the
pure-numpy path.  Numba is also skipped silently when it cannot be imported.
"""

import os

_flag = os.environ.get("BRWCRIT_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    numba = None
    NUMBA_AVAILABLE = False

USE_NUMBA = _requested and NUMBA_AVAILABLE


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def thread_cap():
    """Worker cap from BRWCRIT_THREADS (default 1)."""
    try:
        n = int(os.environ.get("BRWCRIT_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)
