"""Low-level accumulation kernels for truncated-Taylor (jet) arithmetic.

Coefficient arrays are laid out (ncoeff, batch) with the batch axis
contiguous, so the inner loops vectorize. Numba compiles the kernels when
available; a pure-numpy fallback (env WILLMORE4_NO_NUMBA=1) computes the
same sums. Each backend reduces in a fixed order, so repeated runs on one
backend are deterministic; across backends results agree to floating-point
associativity (ulp-level).
"""

from __future__ import annotations

import os

import numpy as np

_USE_NUMBA = os.environ.get("WILLMORE4_NO_NUMBA", "") != "1"

if _USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        _USE_NUMBA = False

NUMBA_OK = _USE_NUMBA


def _mul_acc_numpy(a, b, ia, ib, seg_starts, out):
    # pairs are pre-sorted by output index; reduceat sums each segment
    prod = a[ia] * b[ib]
    out += np.add.reduceat(prod, seg_starts, axis=0)


if _USE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _mul_acc_numba(a, b, ia, ib, seg_starts, out):  # pragma: no cover
        npairs = ia.shape[0]
        nseg = seg_starts.shape[0]
        width = a.shape[1]
        seg = np.empty(width, dtype=np.float64)
        for s in range(nseg):
            lo = seg_starts[s]
            hi = seg_starts[s + 1] if s + 1 < nseg else npairs
            for j in range(width):
                seg[j] = 0.0
            for p in range(lo, hi):
                va = a[ia[p]]
                vb = b[ib[p]]
                for j in range(width):
                    seg[j] = seg[j] + va[j] * vb[j]
            acc = out[s]
            for j in range(width):
                acc[j] += seg[j]

    mul_acc = _mul_acc_numba
else:
    mul_acc = _mul_acc_numpy


def kahan_add(total, comp, value):
    """One compensated-summation step; returns updated (total, comp)."""
    y = value - comp
    t = total + y
    comp = (t - total) - y
    return t, comp
