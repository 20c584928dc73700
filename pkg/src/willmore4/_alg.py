"""Polymorphic scalar algebra over {None, float, Jet}.

Tensor components in the geometry pipeline are held in object arrays whose
entries are Jets, plain floats (constants), or None (structural zeros).
These helpers implement arithmetic uniformly, letting zeros and constants
propagate so that, for instance, a flat ambient scale costs nothing.
"""

from __future__ import annotations

import numpy as np

from .jets import Jet


def jadd(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def jsub(a, b):
    if b is None:
        return a
    if a is None:
        return -b
    return a - b


def jneg(a):
    return None if a is None else -a


def jmul(a, b):
    if a is None or b is None:
        return None
    if isinstance(a, Jet) or isinstance(b, Jet):
        return a * b
    return a * b


def jsum(terms):
    acc = None
    for t in terms:
        acc = jadd(acc, t)
    return acc


def jdiff(a, i):
    """Chart derivative; constants and zeros have zero derivative."""
    if a is None or not isinstance(a, Jet):
        return None
    return a.diff(i)


def jtrunc(a, order):
    if order is not None and isinstance(a, Jet) and a.order > order:
        return a.truncate(order)
    return a


def jtarget(comp):
    """Order of the chart derivative of a component array: one below the
    largest jet order found among the entries (None if there are no jets).
    Connection corrections are truncated to this order before multiplying,
    since the sum with the derivative part coerces down to it anyway."""
    best = None
    for c in comp.flat:
        if isinstance(c, Jet) and (best is None or c.order > best):
            best = c.order
    return None if best is None else max(best - 1, 0)


def jbase(a, width):
    """Base value of a component as a (width,) float array."""
    if a is None:
        return np.zeros(width)
    if isinstance(a, Jet):
        return np.asarray(a.base, dtype=np.float64)
    return np.full(width, float(a))


def omat(*shape):
    return np.empty(shape, dtype=object)
