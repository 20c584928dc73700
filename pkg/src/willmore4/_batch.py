"""Dense-coefficient fast path for quadrature-scale jet algebra.

The object-jet layer stores one Python object per tensor component, which is
exact and convenient but dispatch-bound once a chunk holds thousands of
nodes and the tensors have many components. For the energy quadratures the
downstream algebra (the tractor second fundamental form, its first and
second covariant derivatives, and the final scalar contractions) involves
only small fixed-shape tensors, so the whole chain can run on stacked
coefficient arrays instead: a field of jets becomes one float array of shape
(batch, n_coeffs, *component_shape), and every truncated jet product becomes
a short loop over the multiplication table of the target order with one
vectorized numpy call per table row.

Both representations perform the same truncated Taylor arithmetic, so the
stacked route is validated against the object route entry by entry in the
test suite and agrees to float roundoff.

Layout conventions:
  - axis 0 is the point batch, axis 1 the jet coefficient (graded-lex, so a
    lower-order prefix is a truncation), remaining axes are tensor slots;
  - a "base" array drops the coefficient axis (plain pointwise values);
  - operations never mix widths; all stacks in one computation share the
    batch size of the frame they came from.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from numba import njit

from .jets import Jet, JetSpace, n_coeffs

__all__ = [
    "base",
    "contract",
    "diff",
    "matmul",
    "mul",
    "order_of",
    "stack",
    "trunc",
]


@lru_cache(maxsize=None)
def _order_for_nc(nc: int) -> int:
    for k in range(0, 16):
        if n_coeffs(k) == nc:
            return k
    raise ValueError(f"coefficient count {nc} is not a jet-space size")


def order_of(a: np.ndarray) -> int:
    """Jet order encoded by the coefficient axis of a stacked array."""
    return _order_for_nc(a.shape[1])


@lru_cache(maxsize=None)
def _pair_rows(order: int):
    """(ia, ib, io) triples of the order's multiplication table: the
    product of coefficients ia and ib accumulates into output io."""
    sp = JetSpace.get(order)
    seg = np.append(sp.mul_seg, len(sp.mul_ia))
    io = np.repeat(np.arange(sp.nc), np.diff(seg))
    return sp.mul_ia, sp.mul_ib, io


@lru_cache(maxsize=None)
def _rows_seg(order: int):
    """Multiplication table as (ia, ib, seg): rows seg[s]:seg[s+1] feed
    output coefficient s. Row order in the table is already grouped by
    output index, so seg comes from one searchsorted."""
    ia, ib, io = _pair_rows(order)
    seg = np.searchsorted(io, np.arange(n_coeffs(order) + 1))
    return (np.ascontiguousarray(ia, dtype=np.int64),
            np.ascontiguousarray(ib, dtype=np.int64),
            seg.astype(np.int64))


@njit(cache=True, fastmath=True)
def _k_mm_keep(a, b, ia, ib, seg, out):
    # a: (B, na, J, P, C), b: (B, nb, J, C, Q) with J possibly 1 on either
    # side (broadcast); out: (B, S, J, P, Q). Jet product over the pair
    # table fused with a matrix product on the trailing two slots.
    Bn, S = out.shape[0], out.shape[1]
    J, Pd, Qd = out.shape[2], out.shape[3], out.shape[4]
    Cd = a.shape[4]
    aj = a.shape[2] > 1
    bj = b.shape[2] > 1
    for z in range(Bn):
        for s in range(S):
            for r in range(seg[s], seg[s + 1]):
                pa = ia[r]
                pb = ib[r]
                for j in range(J):
                    ja = j if aj else 0
                    jb = j if bj else 0
                    for pp in range(Pd):
                        for cc in range(Cd):
                            av = a[z, pa, ja, pp, cc]
                            for qq in range(Qd):
                                out[z, s, j, pp, qq] += av * b[z, pb, jb, cc, qq]


@njit(cache=True, fastmath=True)
def _k_mm_sum(a, b, ia, ib, seg, out):
    # Same as _k_mm_keep but the lead axis J is summed away:
    # out: (B, S, P, Q).
    Bn, S = out.shape[0], out.shape[1]
    Pd, Qd = out.shape[2], out.shape[3]
    J, Cd = a.shape[2], a.shape[4]
    for z in range(Bn):
        for s in range(S):
            for r in range(seg[s], seg[s + 1]):
                pa = ia[r]
                pb = ib[r]
                for j in range(J):
                    for pp in range(Pd):
                        for cc in range(Cd):
                            av = a[z, pa, j, pp, cc]
                            for qq in range(Qd):
                                out[z, s, pp, qq] += av * b[z, pb, j, cc, qq]


def stack(comp, order: int, width: int) -> np.ndarray:
    """Stack an object array of {None, float, Jet} components into a dense
    (width, n_coeffs(order), *shape) coefficient array.

    Jet entries must carry at least the requested order (their prefix is
    taken); numbers fill the constant coefficient; None means zero.
    """
    comp = np.asarray(comp, dtype=object)
    nc = n_coeffs(order)
    out = np.zeros((width, nc) + comp.shape, dtype=np.float64)
    for idx in np.ndindex(comp.shape):
        e = comp[idx]
        if e is None:
            continue
        if isinstance(e, Jet):
            if e.order < order:
                raise ValueError(
                    f"component {idx} has jet order {e.order}, "
                    f"need at least {order}"
                )
            out[(slice(None), slice(None)) + idx] = e.c[:nc].T
        else:
            out[(slice(None), 0) + idx] = float(e)
    return out


_PATHS: dict = {}


def contracted(subs, *ops):
    """np.einsum with a cached contraction path keyed by (subs, shapes)."""
    key = (subs, tuple(op.shape for op in ops))
    path = _PATHS.get(key)
    if path is None:
        path = np.einsum_path(subs, *ops, optimize="optimal")[0]
        _PATHS[key] = path
    return np.einsum(subs, *ops, optimize=path)


def base(a: np.ndarray) -> np.ndarray:
    """Pointwise values: the constant coefficient."""
    return a[:, 0]


def trunc(a: np.ndarray, order: int) -> np.ndarray:
    """Truncation view onto the leading coefficients."""
    nc = n_coeffs(order)
    if nc > a.shape[1]:
        raise ValueError(f"cannot raise stacked order {order_of(a)} -> {order}")
    return a[:, :nc]


@njit(cache=True, fastmath=True)
def _k_diff(a, d_src, d_fac, out):
    # a: (B, nc_hi, S) contiguous, out: (B, nc_lo, 4, S); one fused pass
    # instead of a fancy-index gather plus a broadcast multiply.
    Bn, S = a.shape[0], a.shape[2]
    nlo, nd = out.shape[1], out.shape[2]
    for z in range(Bn):
        for k in range(nlo):
            for i in range(nd):
                src = d_src[i, k]
                f = d_fac[i, k]
                for s in range(S):
                    out[z, k, i, s] = f * a[z, src, s]


def diff(a: np.ndarray) -> np.ndarray:
    """All four chart derivatives at once, one order lower.

    (B, nc, *s) -> (B, nc_lo, 4, *s); entry [:, :, i] is the i-th partial.
    """
    k = order_of(a)
    if k == 0:
        raise ValueError("cannot differentiate an order-0 stack")
    sp = JetSpace.get(k)
    nlo = n_coeffs(k - 1)
    flat = np.ascontiguousarray(a).reshape(a.shape[0], a.shape[1], -1)
    out = np.empty((a.shape[0], nlo, 4, flat.shape[2]), dtype=np.float64)
    _k_diff(flat, sp.d_src.astype(np.int64), sp.d_fac, out)
    return out.reshape((a.shape[0], nlo, 4) + a.shape[2:])


def _align(a, b, order):
    ka, kb = order_of(a), order_of(b)
    if order is None:
        order = min(ka, kb)
    return trunc(a, order), trunc(b, order), order


def mul(a: np.ndarray, b: np.ndarray, order: int | None = None) -> np.ndarray:
    """Componentwise jet product, numpy broadcasting over tensor slots."""
    a, b, order = _align(a, b, order)
    ia, ib, io = _pair_rows(order)
    osh = np.broadcast_shapes(a.shape[2:], b.shape[2:])
    out = np.zeros((a.shape[0], n_coeffs(order)) + osh, dtype=np.float64)
    for p, q, r in zip(ia, ib, io):
        out[:, r] += a[:, p] * b[:, q]
    return out


def matmul(a: np.ndarray, b: np.ndarray, order: int | None = None) -> np.ndarray:
    """Jet-valued matrix product over the trailing two tensor slots, with
    numpy matmul broadcasting on any slots in between."""
    a, b, order = _align(a, b, order)
    if a.ndim in (4, 5) and b.ndim == a.ndim:
        ia, ib, seg = _rows_seg(order)
        av = a if a.ndim == 5 else a[:, :, None]
        bv = b if b.ndim == 5 else b[:, :, None]
        J = max(av.shape[2], bv.shape[2])
        out = np.zeros(
            (a.shape[0], n_coeffs(order), J, av.shape[3], bv.shape[4]),
            dtype=np.float64,
        )
        _k_mm_keep(av, bv, ia, ib, seg, out)
        return out if a.ndim == 5 else out[:, :, 0]
    ia, ib, io = _pair_rows(order)
    first = np.matmul(a[:, 0], b[:, 0])
    out = np.zeros((a.shape[0], n_coeffs(order)) + first.shape[1:], dtype=np.float64)
    out[:, 0] = first
    for p, q, r in zip(ia[1:], ib[1:], io[1:]):
        out[:, r] += np.matmul(a[:, p], b[:, q])
    return out


def _kernel_contract(subs: str, a: np.ndarray, b: np.ndarray, order: int):
    """Fused-kernel forms of the contraction patterns the energy sweep
    uses; returns None for anything else."""
    B, S = a.shape[0], n_coeffs(order)
    ia, ib, seg = _rows_seg(order)

    def run_sum(av, bv, shape):
        out = np.zeros((B, S, av.shape[3], bv.shape[4]), dtype=np.float64)
        _k_mm_sum(np.ascontiguousarray(av), np.ascontiguousarray(bv),
                  ia, ib, seg, out)
        return out.reshape((B, S) + shape)

    def run_keep(av, bv, shape):
        out = np.zeros((B, S, 1, av.shape[3], bv.shape[4]), dtype=np.float64)
        _k_mm_keep(np.ascontiguousarray(av), np.ascontiguousarray(bv),
                   ia, ib, seg, out)
        return out.reshape((B, S) + shape)

    na, nb = a.shape[1], b.shape[1]
    if subs == "ipc,icq->pq":
        out = np.zeros((B, S, a.shape[3], b.shape[4]), dtype=np.float64)
        _k_mm_sum(a, b, ia, ib, seg, out)
        return out
    if subs == "ij,ijpq->pq":
        ij = a.shape[2] * a.shape[3]
        pq = b.shape[4] * b.shape[5]
        return run_sum(a.reshape(B, na, ij, 1, 1),
                       b.reshape(B, nb, ij, 1, pq),
                       (b.shape[4], b.shape[5]))
    if subs == "ij,jpq->ipq":
        pq = b.shape[3] * b.shape[4]
        return run_keep(a.reshape(B, na, 1, a.shape[2], a.shape[3]),
                        b.reshape(B, nb, 1, b.shape[2], pq),
                        (a.shape[2], b.shape[3], b.shape[4]))
    if subs == "ij,mij->m":
        ij = a.shape[2] * a.shape[3]
        return run_keep(b.reshape(B, nb, 1, b.shape[2], ij),
                        a.reshape(B, na, 1, ij, 1),
                        (b.shape[2],))
    if subs == "m,mpq->pq":
        pq = b.shape[3] * b.shape[4]
        return run_sum(a.reshape(B, na, a.shape[2], 1, 1),
                       b.reshape(B, nb, b.shape[2], 1, pq),
                       (b.shape[3], b.shape[4]))
    return None


def contract(subs: str, a: np.ndarray, b: np.ndarray,
             order: int | None = None) -> np.ndarray:
    """Jet-valued einsum over tensor slots, e.g. "mij,mpq->ijpq".

    The batch and coefficient axes are handled internally; subs names only
    the tensor slots of both operands.
    """
    a, b, order = _align(a, b, order)
    fused = _kernel_contract(subs, a, b, order)
    if fused is not None:
        return fused
    ia, ib, io = _pair_rows(order)
    lhs, rhs = subs.split("->")
    sa, sb = lhs.split(",")
    spec = f"z{sa},z{sb}->z{rhs}"
    first = contracted(spec, a[:, 0], b[:, 0])
    out = np.zeros((a.shape[0], n_coeffs(order)) + first.shape[1:], dtype=np.float64)
    out[:, 0] = first
    for p, q, r in zip(ia[1:], ib[1:], io[1:]):
        out[:, r] += contracted(spec, a[:, p], b[:, q])
    return out
