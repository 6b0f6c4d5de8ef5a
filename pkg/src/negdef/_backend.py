"""Kernel backend selection.

Set ``NEGDEF_BACKEND=numpy`` to bypass numba and run the pure numpy kernels.
Numba is also skipped if it fails to import.
"""

import os

_requested = os.environ.get("NEGDEF_BACKEND", "numba").strip().lower()

if _requested not in ("numba", "numpy"):
    raise ImportError(f"NEGDEF_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

HAVE_NUMBA = False
if _requested == "numba":
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover
        HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"
