"""Optional numba acceleration.

Every numerical core in this package is written as a plain function over
float64 scalars/arrays and decorated with :func:`maybe_jit`.  When numba is
importable the cores are compiled (cached on disk); otherwise the same code
runs as ordinary Python, so results are identical either way -- only speed
differs.
"""

try:  # pragma: no cover - exercised implicitly by every import
    from numba import njit

    HAVE_NUMBA = True

    def maybe_jit(func):
        return njit(cache=True)(func)

except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def maybe_jit(func):
        return func
