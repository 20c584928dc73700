"""Truncated multivariate Taylor arithmetic in four parameters.

A jet of order K stores the Taylor coefficients of a scalar function of the
four chart parameters, truncated at total degree K, so every partial
derivative up to order K of any downstream quantity is exact (the only
approximation anywhere in the pipeline is quadrature). Coefficients are
indexed by multi-indices in graded-lexicographic order, which makes the
order-K' table a prefix of the order-K table for K' < K: truncation is a
zero-copy view.

Jets carry a trailing batch axis so one arithmetic call processes a whole
chunk of sample points.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import product as _iproduct

import numpy as np

from ._kernels import mul_acc

NVARS = 4
MAX_ORDER = 6


def n_coeffs(order: int) -> int:
    """Number of multi-indices with |alpha| <= order in NVARS variables."""
    return math.comb(order + NVARS, NVARS)


def _graded_lex_exponents(order: int) -> np.ndarray:
    rows = []
    for deg in range(order + 1):
        block = [e for e in _iproduct(range(deg + 1), repeat=NVARS) if sum(e) == deg]
        block.sort()
        rows.extend(block)
    return np.array(rows, dtype=np.int64)


class JetSpace:
    """Immutable tables for one jet order: index layout, product pairs,
    differentiation gathers, and factorials."""

    _cache: dict[int, "JetSpace"] = {}

    def __init__(self, order: int):
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in [0, {MAX_ORDER}], got {order}")
        self.order = order
        self.exps = _graded_lex_exponents(order)
        self.nc = self.exps.shape[0]
        assert self.nc == n_coeffs(order)
        self.index_of = {tuple(e): i for i, e in enumerate(self.exps)}

        # factor pairs alpha + beta = gamma, sorted by output index
        ia, ib, io = [], [], []
        for i, ea in enumerate(self.exps):
            for j, eb in enumerate(self.exps):
                g = tuple(ea + eb)
                k = self.index_of.get(g)
                if k is not None:
                    ia.append(i)
                    ib.append(j)
                    io.append(k)
        srt = np.lexsort((np.array(ib), np.array(ia), np.array(io)))
        self.mul_ia = np.array(ia, dtype=np.int64)[srt]
        self.mul_ib = np.array(ib, dtype=np.int64)[srt]
        mul_io = np.array(io, dtype=np.int64)[srt]
        # segment starts: outputs are 0..nc-1, each present
        self.mul_seg = np.searchsorted(mul_io, np.arange(self.nc)).astype(np.int64)

        # d/dtheta_i gather tables: order K -> order K-1
        if order > 0:
            nc_lo = n_coeffs(order - 1)
            self.d_src = np.empty((NVARS, nc_lo), dtype=np.int64)
            self.d_fac = np.empty((NVARS, nc_lo), dtype=np.float64)
            for i in range(NVARS):
                for p in range(nc_lo):
                    e = self.exps[p].copy()
                    e[i] += 1
                    self.d_src[i, p] = self.index_of[tuple(e)]
                    self.d_fac[i, p] = e[i]

        self.factorials = np.array(
            [math.prod(math.factorial(int(k)) for k in e) for e in self.exps],
            dtype=np.float64,
        )

    @classmethod
    def get(cls, order: int) -> "JetSpace":
        sp = cls._cache.get(order)
        if sp is None:
            sp = cls._cache[order] = cls(order)
        return sp


def _as_batch(x, width: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(width, float(arr))
    if arr.shape != (width,):
        raise ValueError(f"batch shape {arr.shape} incompatible with width {width}")
    return arr


class Jet:
    """One batched jet: coefficient array of shape (n_coeffs(order), width)."""

    __slots__ = ("space", "c")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.c = coeffs

    # -- constructors ------------------------------------------------------

    @staticmethod
    def variable(i: int, x0, order: int, width: int = 1) -> "Jet":
        if not 0 <= i < NVARS:
            raise ValueError(f"axis index must be in [0, {NVARS}), got {i}")
        sp = JetSpace.get(order)
        c = np.zeros((sp.nc, width))
        c[0] = _as_batch(x0, width)
        if order >= 1:
            e = [0] * NVARS
            e[i] = 1
            c[sp.index_of[tuple(e)]] = 1.0
        return Jet(sp, c)

    @staticmethod
    def const(value, order: int, width: int = 1) -> "Jet":
        sp = JetSpace.get(order)
        c = np.zeros((sp.nc, width))
        c[0] = _as_batch(value, width)
        return Jet(sp, c)

    @staticmethod
    def zero(order: int, width: int = 1) -> "Jet":
        sp = JetSpace.get(order)
        return Jet(sp, np.zeros((sp.nc, width)))

    # -- views and extraction ----------------------------------------------

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def width(self) -> int:
        return self.c.shape[1]

    @property
    def base(self) -> np.ndarray:
        return self.c[0]

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError(f"cannot raise jet order {self.order} -> {order}")
        sp = JetSpace.get(order)
        return Jet(sp, self.c[: sp.nc])

    def copy(self) -> "Jet":
        return Jet(self.space, self.c.copy())

    def partial(self, alpha) -> np.ndarray:
        """True partial derivative at the base point: alpha! * coefficient."""
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != NVARS or any(a < 0 for a in alpha):
            raise ValueError(f"bad multi-index {alpha}")
        if sum(alpha) > self.order:
            raise ValueError(
                f"multi-index {alpha} exceeds jet order {self.order}"
            )
        p = self.space.index_of[alpha]
        return self.c[p] * self.space.factorials[p]

    def diff(self, i: int) -> "Jet":
        """Derivative along parameter axis i; order drops by one."""
        if self.order == 0:
            raise ValueError("jet order exhausted: cannot differentiate an order-0 jet")
        sp = self.space
        lo = JetSpace.get(self.order - 1)
        return Jet(lo, self.c[sp.d_src[i]] * sp.d_fac[i][:, None])

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other):
        """Align orders (truncating to the min) and return coefficient pair."""
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            return self.truncate(k), other.truncate(k)
        return None

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is not None:
            a, b = pair
            return Jet(a.space, a.c + b.c)
        c = self.c.copy()
        c[0] = c[0] + np.asarray(other, dtype=np.float64)
        return Jet(self.space, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __sub__(self, other):
        pair = self._coerce(other)
        if pair is not None:
            a, b = pair
            return Jet(a.space, a.c - b.c)
        c = self.c.copy()
        c[0] = c[0] - np.asarray(other, dtype=np.float64)
        return Jet(self.space, c)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        pair = self._coerce(other)
        if pair is not None:
            a, b = pair
            sp = a.space
            out = np.zeros_like(a.c)
            mul_acc(a.c, b.c, sp.mul_ia, sp.mul_ib, sp.mul_seg, out)
            return Jet(sp, out)
        return Jet(self.space, self.c * np.asarray(other, dtype=np.float64))

    __rmul__ = __mul__

    def ifma(self, a: "Jet", b: "Jet") -> "Jet":
        """In-place fused accumulate self += a*b. Only safe on jets that own
        their storage (fresh zeros/copies), never on truncation views."""
        k = self.order
        a = a.truncate(k)
        b = b.truncate(k)
        sp = self.space
        mul_acc(a.c, b.c, sp.mul_ia, sp.mul_ib, sp.mul_seg, self.c)
        return self

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * jet_apply("recip", other)
        return Jet(self.space, self.c / np.asarray(other, dtype=np.float64))

    def __rtruediv__(self, other):
        return jet_apply("recip", self) * other

    def __pow__(self, q):
        if isinstance(q, int):
            if q == 0:
                return Jet.const(1.0, self.order, self.width)
            if q > 0:
                out = self
                for _ in range(q - 1):
                    out = out * self
                return out
            return jet_apply("recip", self) ** (-q)
        return _compose_series(self, _pow_coeffs(q), "pow", lambda v: v > 0.0)


# -- elementary functions ----------------------------------------------------


def _check_domain(tag: str, base: np.ndarray, ok) -> None:
    good = ok(base)
    if not np.all(good):
        bad = float(np.asarray(base).reshape(-1)[int(np.argmin(good))])
        raise ValueError(f"jet_apply({tag}): base value {bad} outside domain")


def _compose_series(a: Jet, coeff_fn, tag: str, ok=None) -> Jet:
    """Taylor coefficients c_p(base) composed with the nilpotent part of a,
    by Horner's scheme (order jet multiplications)."""
    if ok is not None:
        _check_domain(tag, a.base, ok)
    K = a.order
    cs = coeff_fn(a.base, K)  # list of (width,) arrays, p = 0..K
    z = a.copy()
    z.c[0] = 0.0
    out = Jet.const(cs[K], K, a.width)
    for p in range(K - 1, -1, -1):
        out = out * z
        out.c[0] += cs[p]
    return out


def _exp_coeffs(x0, K):
    e = np.exp(x0)
    return [e / math.factorial(p) for p in range(K + 1)]


def _log_coeffs(x0, K):
    cs = [np.log(x0)]
    for p in range(1, K + 1):
        cs.append(((-1.0) ** (p + 1)) / (p * x0**p))
    return cs


def _sin_coeffs(x0, K):
    s, c = np.sin(x0), np.cos(x0)
    cycle = [s, c, -s, -c]
    return [cycle[p % 4] / math.factorial(p) for p in range(K + 1)]


def _cos_coeffs(x0, K):
    s, c = np.sin(x0), np.cos(x0)
    cycle = [c, -s, -c, s]
    return [cycle[p % 4] / math.factorial(p) for p in range(K + 1)]


def _pow_coeffs(q):
    def fn(x0, K):
        cs = []
        binom = 1.0
        for p in range(K + 1):
            cs.append(binom * x0 ** (q - p))
            binom *= (q - p) / (p + 1)
        return cs

    return fn


def _recip_coeffs(x0, K):
    inv = 1.0 / x0
    return [((-1.0) ** p) * inv ** (p + 1) for p in range(K + 1)]


_ELEMENTARY = {
    "sin": (_sin_coeffs, None),
    "cos": (_cos_coeffs, None),
    "exp": (_exp_coeffs, None),
    "log": (_log_coeffs, lambda v: v > 0.0),
    "sqrt": (_pow_coeffs(0.5), lambda v: v > 0.0),
    "recip": (_recip_coeffs, lambda v: v != 0.0),
}


def jet_apply(tag: str, a: Jet, exponent: float | None = None) -> Jet:
    """Apply an elementary function to a jet by series composition."""
    if tag == "pow":
        if exponent is None:
            raise ValueError("jet_apply('pow', ...) needs an exponent")
        return a**exponent
    try:
        coeff_fn, ok = _ELEMENTARY[tag]
    except KeyError:
        raise ValueError(f"unknown elementary function tag {tag!r}") from None
    return _compose_series(a, coeff_fn, tag, ok)


def jet_variable(i: int, x0, order: int, width: int = 1) -> Jet:
    """Seed jet for chart parameter i at base value x0."""
    return Jet.variable(i, x0, order, width)


def jet_const(value, order: int, width: int = 1) -> Jet:
    return Jet.const(value, order, width)


def jet_partial(a: Jet, alpha) -> np.ndarray:
    return a.partial(alpha)


def sin(a: Jet) -> Jet:
    return jet_apply("sin", a)


def cos(a: Jet) -> Jet:
    return jet_apply("cos", a)


def exp(a: Jet) -> Jet:
    return jet_apply("exp", a)


def log(a: Jet) -> Jet:
    return jet_apply("log", a)


def sqrt(a: Jet) -> Jet:
    return jet_apply("sqrt", a)


def recip(a: Jet) -> Jet:
    return jet_apply("recip", a)


@lru_cache(maxsize=None)
def _warm(order: int) -> None:
    JetSpace.get(order)


def warm_tables(max_order: int = MAX_ORDER) -> None:
    """Precompute index tables (and trigger kernel compilation) up front."""
    for k in range(max_order + 1):
        _warm(k)
    a = Jet.variable(0, 0.5, max_order, 2)
    _ = a * a
