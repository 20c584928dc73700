"""Standard tractors along a four-dimensional submanifold of conformally
flat space.

Component conventions.  A tractor at a surface point is a slot vector of
length n + 2 in the working scale ghat = E delta (E = e^{2 omega}): slot 0
is the top scalar sigma, slots 1..n hold an ambient vector m^a whose index
is raised by the working metric, and slot n + 1 is the bottom scalar rho.
The invariant pairing is

    <U, V> = sigma rho' + rho sigma' + E sum_a m^a m'^a,

realized by the block matrix h (ones in the two corners, E on the middle
diagonal); its signature is (n + 1, 1).  Endomorphisms are stored as
matrices M[out, in] on slot vectors, so an indexed operator acting on upper
tractors as U^A -> T_A{}^B U^A appears as M[B, A].  The h-adjoint
M+ = h^{-1} M^T h is computed entrywise (corner swap, middle untouched,
edge rows and columns scaled by E or its inverse), never by matrix
products.

The pulled-back connection acts on slot vectors as nabla_j U = d_j U +
omega_j U, with sparse coefficient matrices omega_j assembled from the
pushforward, the ambient Christoffel symbols, and the ambient Schouten
tensor of the working scale; in the flat scale each omega_j has just 2n
entries.  Submanifold data enter through the normal tractor injector
v^a -> (0, v^a, E H.v), the complementary projectors Ntr and Pitr, and the
tractor second fundamental form, computed both directly from the projector
derivative and from its explicit slot formula.  The checked connection is
the pair of projector sandwiches Pi nabla (Pi .) + N nabla (N .); on each
tractor axis the sandwich equals nabla minus the action of
K_j = L_j - L_j+, which is the form used when several axes are corrected
at once (the two agree identically, and tests pin that).

Everything is batched: each component is a Jet whose coefficients carry a
trailing chart-point axis, None marks a structural zero, and plain floats
mark constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._alg import jadd, jbase, jdiff, jmul, jneg, jsub, jsum, jtarget, jtrunc, omat
from .jets import jet_apply
from .riemannian import covariant_D

TRACTOR_KINDS = "TC"


def _smul(c, x):
    """Scalar multiply that skips unit constants."""
    if isinstance(c, float) and c == 1.0:
        return x
    return jmul(c, x)


# -- small matrix algebra over {None, float, Jet} entries ---------------------------


def mdot(A, B):
    """Object-matrix product with structural-zero skipping."""
    rows, inner = A.shape
    cols = B.shape[1]
    out = omat(rows, cols)
    out[:] = None
    for i in range(rows):
        for k in range(cols):
            out[i, k] = jsum(jmul(A[i, j], B[j, k]) for j in range(inner))
    return out


def mvec(A, v):
    """Matrix times slot vector."""
    rows, inner = A.shape
    out = omat(rows)
    out[:] = None
    for i in range(rows):
        out[i] = jsum(jmul(A[i, j], v[j]) for j in range(inner))
    return out


def madd(A, B):
    out = omat(*A.shape)
    for idx in np.ndindex(A.shape):
        out[idx] = jadd(A[idx], B[idx])
    return out


def msub(A, B):
    out = omat(*A.shape)
    for idx in np.ndindex(A.shape):
        out[idx] = jsub(A[idx], B[idx])
    return out


def mtrace(A):
    return jsum(A[p, p] for p in range(A.shape[0]))


def component_max(arr, width: int) -> float:
    """Largest absolute base value over all components of an object array."""
    worst = 0.0
    for c in np.asarray(arr, dtype=object).ravel():
        worst = max(worst, float(np.max(np.abs(jbase(c, width)))))
    return worst


# -- mixed-valence fields -----------------------------------------------------------


@dataclass
class MixedField:
    """A jet-valued component array with an explicit index valence.

    valence is a string over the index kinds of riemannian.covariant_D
    ('l', 'u', 'n', 'a', 'b', 's') extended by 'T' (upper tractor axis) and
    'C' (lower tractor axis).  Tractor axes have length n + 2.
    """

    valence: str
    comp: np.ndarray

    def __post_init__(self):
        self.comp = np.asarray(self.comp, dtype=object)
        if len(self.valence) != self.comp.ndim:
            raise ValueError(
                f"valence {self.valence!r} does not match array rank "
                f"{self.comp.ndim}"
            )


# -- the per-frame tractor stack ------------------------------------------------------


class TractorFrame:
    """Tractor data over one batched chart frame, built lazily.

    All members live in the working scale of the underlying frame; matrix
    members are object arrays over {None, float, Jet} whose orders follow
    the frame's truncation schedule (one order is lost per derivative).
    """

    def __init__(self, frame):
        self.fr = frame
        self.n = frame.n
        self.dim = frame.n + 2
        self._cache = {}

    def _get(self, name, builder):
        if name not in self._cache:
            self._cache[name] = builder()
        return self._cache[name]

    @property
    def width(self) -> int:
        return self.fr.width

    @property
    def E(self):
        return self.fr.ff.E

    @property
    def Einv(self):
        return self.fr.ff.Einv

    # -- metric ------------------------------------------------------------

    @property
    def h(self):
        def build():
            m = omat(self.dim, self.dim)
            m[:] = None
            m[0, self.dim - 1] = 1.0
            m[self.dim - 1, 0] = 1.0
            for a in range(self.n):
                m[1 + a, 1 + a] = self.E
            return m

        return self._get("h", build)

    @property
    def hinv(self):
        def build():
            m = omat(self.dim, self.dim)
            m[:] = None
            m[0, self.dim - 1] = 1.0
            m[self.dim - 1, 0] = 1.0
            for a in range(self.n):
                m[1 + a, 1 + a] = self.Einv
            return m

        return self._get("hinv", build)

    def pair(self, U, V):
        """Invariant pairing of two slot vectors."""
        last = self.dim - 1
        mid = jsum(jmul(U[1 + a], V[1 + a]) for a in range(self.n))
        return jsum(
            [jmul(U[0], V[last]), jmul(U[last], V[0]), _smul(self.E, mid)]
        )

    def dagger(self, M):
        """h-adjoint h^{-1} M^T h, computed entrywise."""
        last = self.dim - 1
        swap = lambda p: last if p == 0 else (0 if p == last else p)
        out = omat(self.dim, self.dim)
        out[:] = None
        for p in range(self.dim):
            pmid = 0 < p < last
            for r in range(self.dim):
                val = M[swap(r), swap(p)]
                if val is None:
                    continue
                rmid = 0 < r < last
                if pmid and not rmid:
                    val = _smul(self.Einv, val)
                elif rmid and not pmid:
                    val = _smul(self.E, val)
                out[p, r] = val
        return out

    # -- connection coefficients --------------------------------------------

    @property
    def omega(self):
        """Slot matrices of the pulled-back connection, one per direction."""

        def build():
            fr, n, dim = self.fr, self.n, self.dim
            pi = fr.ff.pi
            P = fr.P_amb
            amb = fr.amb_gamma
            E, Einv = self.E, self.Einv
            mats = []
            for j in range(4):
                w = omat(dim, dim)
                w[:] = None
                for a in range(n):
                    w[0, 1 + a] = jneg(_smul(E, pi[a, j]))
                    w[1 + a, dim - 1] = pi[a, j]
                    for c in range(n):
                        w[1 + a, 1 + c] = amb[a][c][j]
                    w[1 + a, 0] = _smul(
                        Einv,
                        jsum(jmul(pi[c, j], P[c, a]) for c in range(n)),
                    )
                    w[dim - 1, 1 + a] = jneg(
                        jsum(jmul(pi[b, j], P[b, a]) for b in range(n))
                    )
                mats.append(w)
            return tuple(mats)

        return self._get("omega", build)

    # -- splitting vectors ---------------------------------------------------

    @property
    def X(self):
        def build():
            v = omat(self.dim)
            v[:] = None
            v[self.dim - 1] = 1.0
            return v

        return self._get("X", build)

    @property
    def Ytil(self):
        def build():
            H = self.fr.ex.H
            v = omat(self.dim)
            v[:] = None
            v[0] = 1.0
            for a in range(self.n):
                v[1 + a] = jneg(H[a])
            H2 = jsum(jmul(H[a], H[a]) for a in range(self.n))
            v[self.dim - 1] = jmul(-0.5, _smul(self.E, H2))
            return v

        return self._get("Ytil", build)

    @property
    def Ztil(self):
        def build():
            pi = self.fr.ff.pi
            vecs = []
            for j in range(4):
                v = omat(self.dim)
                v[:] = None
                for a in range(self.n):
                    v[1 + a] = pi[a, j]
                vecs.append(v)
            return tuple(vecs)

        return self._get("Ztil", build)

    # -- normal tractor injector and projectors ------------------------------

    @property
    def inj(self):
        """(n+2, n) matrix of v^a -> (0, v^a, E H.v)."""

        def build():
            H = self.fr.ex.H
            m = omat(self.dim, self.n)
            m[:] = None
            for a in range(self.n):
                m[1 + a, a] = 1.0
                m[self.dim - 1, a] = _smul(self.E, H[a])
            return m

        return self._get("inj", build)

    @property
    def ext(self):
        """(n, n+2) matrix extracting the normal vector of a tractor."""

        def build():
            H = self.fr.ex.H
            N = self.fr.ff.normal
            m = omat(self.n, self.dim)
            m[:] = None
            for a in range(self.n):
                m[a, 0] = H[a]
                for b in range(self.n):
                    m[a, 1 + b] = N[a, b]
            return m

        return self._get("ext", build)

    def inject(self, v):
        """Slot vector of a normal-bundle vector (components v[a])."""
        H = self.fr.ex.H
        out = omat(self.dim)
        out[:] = None
        for a in range(self.n):
            out[1 + a] = v[a]
        out[self.dim - 1] = _smul(
            self.E, jsum(jmul(H[a], v[a]) for a in range(self.n))
        )
        return out

    @property
    def Ntr(self):
        """Normal tractor projector (closed form of inj @ ext)."""

        def build():
            H = self.fr.ex.H
            N = self.fr.ff.normal
            E = self.E
            m = omat(self.dim, self.dim)
            m[:] = None
            for a in range(self.n):
                m[1 + a, 0] = H[a]
                for b in range(self.n):
                    m[1 + a, 1 + b] = N[a, b]
                m[self.dim - 1, 1 + a] = _smul(E, H[a])
            H2 = jsum(jmul(H[a], H[a]) for a in range(self.n))
            m[self.dim - 1, 0] = _smul(E, H2)
            return m

        return self._get("Ntr", build)

    @property
    def Pitr(self):
        """Tangential tractor projector, identity minus Ntr."""

        def build():
            last = self.dim - 1
            m = omat(self.dim, self.dim)
            m[:] = None
            Nt = self.Ntr
            m[0, 0] = 1.0
            m[last, last] = 1.0
            for p in range(self.dim):
                for q in range(self.dim):
                    if Nt[p, q] is None:
                        continue
                    base = 1.0 if p == q else None
                    m[p, q] = jsub(base, Nt[p, q])
            return m

        return self._get("Pitr", build)

    # -- tractor second fundamental form -------------------------------------

    @property
    def Lmat(self):
        """Direct route: L_j = (nabla_j Pitr) Pitr, one matrix per
        direction; maps tangential tractors to normal ones."""

        def build():
            P = self.Pitr
            mats = []
            for j in range(4):
                dP = omat(self.dim, self.dim)
                for p in range(self.dim):
                    for q in range(self.dim):
                        dP[p, q] = jdiff(P[p, q], j)
                cov = madd(dP, msub(mdot(self.omega[j], P), mdot(P, self.omega[j])))
                mats.append(mdot(cov, P))
            return tuple(mats)

        return self._get("Lmat", build)

    @property
    def Lsplit(self):
        """Split route: the explicit slot formula, columnwise.  Acting on
        (sigma, m, rho) it returns the injected normal vector

            sigma psi_j + IIo_j(m-tangential part),

        with psi_j^a = -D_j H^a + Einv Pi^b_j N^a_c P_bc."""

        def build():
            fr, n = self.fr, self.n
            pi, ginv = fr.ff.pi, fr.ff.ginv
            N = fr.ff.normal
            P = fr.P_amb
            H = fr.ex.H
            IIo = fr.ex.IIo
            E, Einv = self.E, self.Einv
            DH = fr.D(H, "n")
            up = omat(4, 4, n)
            for j in range(4):
                for k in range(4):
                    for a in range(n):
                        up[j, k, a] = jsum(
                            jmul(ginv[k, l], IIo[j, l, a]) for l in range(4)
                        )
            mats = []
            for j in range(4):
                M = omat(self.dim, self.dim)
                M[:] = None
                psi = omat(n)
                for a in range(n):
                    corr = jsum(
                        jmul(jmul(pi[b, j], N[a, c]), P[b, c])
                        for b in range(n)
                        for c in range(n)
                    )
                    psi[a] = jadd(jneg(DH[j, a]), _smul(Einv, corr))
                self._write_injected_column(M, 0, psi)
                for b in range(n):
                    w = omat(n)
                    for a in range(n):
                        w[a] = _smul(
                            E,
                            jsum(
                                jmul(up[j, k, a], pi[b, k]) for k in range(4)
                            ),
                        )
                    self._write_injected_column(M, 1 + b, w)
                mats.append(M)
            return tuple(mats)

        return self._get("Lsplit", build)

    def _write_injected_column(self, M, col, v):
        H = self.fr.ex.H
        for a in range(self.n):
            M[1 + a, col] = v[a]
        M[self.dim - 1, col] = _smul(
            self.E, jsum(jmul(H[a], v[a]) for a in range(self.n))
        )

    # -- checked connection ---------------------------------------------------

    @property
    def Kmats(self):
        """K_j = L_j - L_j+, the h-antisymmetric correction whose removal
        from the connection preserves the tangential/normal splitting."""

        def build():
            return tuple(
                msub(Lj, self.dagger(Lj)) for Lj in self.Lmat
            )

        return self._get("Kmats", build)

    @property
    def omega_checked(self):
        def build():
            return tuple(
                msub(self.omega[j], self.Kmats[j]) for j in range(4)
            )

        return self._get("omega_checked", build)


# -- module operations ------------------------------------------------------------------


def tractor_connection(tf: TractorFrame, field, kinds: str | None = None,
                       checked: bool = False):
    """Coupled covariant derivative of a mixed-valence field with tractor
    axes; prepends one lower tangent index.

    field is a MixedField or a plain object array with an explicit kinds
    string.  Non-tractor axes are handled by the intrinsic/ambient coupled
    derivative; each 'T' axis receives + omega_j, each 'C' axis - omega_j^T.
    With checked=True the splitting-preserving connection is used on the
    tractor axes instead.
    """
    wrap = isinstance(field, MixedField)
    if wrap:
        kinds, comp = field.valence, field.comp
    else:
        comp = np.asarray(field, dtype=object)
    if kinds is None:
        raise ValueError("kinds string required for a plain component array")
    if len(kinds) != comp.ndim:
        raise ValueError(
            f"kinds {kinds!r} does not match array rank {comp.ndim}"
        )
    for s, kind in enumerate(kinds):
        if kind in TRACTOR_KINDS and comp.shape[s] != tf.dim:
            raise ValueError(
                f"tractor axis {s} has length {comp.shape[s]}, "
                f"expected {tf.dim}"
            )
    base_kinds = "".join("s" if k in TRACTOR_KINDS else k for k in kinds)
    out = covariant_D(comp, base_kinds, tf.fr)
    mats = tf.omega_checked if checked else tf.omega
    tgt = jtarget(comp)
    for s, kind in enumerate(kinds):
        if kind not in TRACTOR_KINDS:
            continue
        for j in range(4):
            wj = mats[j]
            for idx in np.ndindex(comp.shape):
                v = idx[s]
                if kind == "T":
                    corr = jsum(
                        jmul(jtrunc(wj[v, c], tgt),
                             jtrunc(comp[idx[:s] + (c,) + idx[s + 1:]], tgt))
                        for c in range(tf.dim)
                    )
                else:
                    corr = jneg(jsum(
                        jmul(jtrunc(wj[c, v], tgt),
                             jtrunc(comp[idx[:s] + (c,) + idx[s + 1:]], tgt))
                        for c in range(tf.dim)
                    ))
                out[(j,) + idx] = jadd(out[(j,) + idx], corr)
    return MixedField("l" + kinds, out) if wrap else out


def checked_derivative(tf: TractorFrame, field, kinds: str | None = None):
    """Splitting-preserving covariant derivative (tractor axes corrected by
    the checked connection)."""
    return tractor_connection(tf, field, kinds, checked=True)


def checked_sandwich(tf: TractorFrame, U):
    """Literal two-block form of the checked derivative of a slot vector:
    Pi nabla (Pi U) + N nabla (N U).  Used as a cross-check of the
    single-matrix form on the tractor axis."""
    out = omat(4, tf.dim)
    out[:] = None
    for proj in (tf.Pitr, tf.Ntr):
        PU = mvec(proj, U)
        DPU = tractor_connection(tf, PU, "T")
        for j in range(4):
            vj = mvec(proj, DPU[j])
            for p in range(tf.dim):
                out[j, p] = jadd(out[j, p], vj[p])
    return out


def normal_tractor_injector(tf: TractorFrame):
    """The (n+2, n) slot matrix of the normal tractor injector."""
    return tf.inj


def tractor_projectors(tf: TractorFrame):
    """(normal projector, tangential projector) slot matrices."""
    return tf.Ntr, tf.Pitr


def tractor_sff_direct(tf: TractorFrame):
    """Tractor second fundamental form from the projector derivative."""
    return tf.Lmat


def tractor_sff_split(tf: TractorFrame):
    """Tractor second fundamental form from the explicit slot formula."""
    return tf.Lsplit


def fialkow(tf: TractorFrame):
    """(F_jk, f, Pcheck_jk): the submanifold Schouten comparison.

    Pcheck is the pulled-back ambient Schouten plus the mean-curvature
    terms; F = Pcheck - p is trace-adjusted against the intrinsic Schouten
    and f is its g-trace.
    """
    fr, n = tf.fr, tf.n
    pi, g, ginv = fr.ff.pi, fr.ff.g, fr.ff.ginv
    P = fr.P_amb
    H = fr.ex.H
    IIo = fr.ex.IIo
    E = tf.E
    H2 = jsum(jmul(H[a], H[a]) for a in range(n))
    Pc = omat(4, 4)
    for j in range(4):
        for k in range(4):
            pullback = jsum(
                jmul(jmul(pi[a, j], pi[b, k]), P[a, b])
                for a in range(n)
                for b in range(n)
            )
            hterm = _smul(
                E, jsum(jmul(H[c], IIo[j, k, c]) for c in range(n))
            )
            gterm = jmul(0.5, _smul(E, jmul(H2, g[j, k])))
            Pc[j, k] = jsum([pullback, hterm, gterm])
    F = omat(4, 4)
    for j in range(4):
        for k in range(4):
            F[j, k] = jsub(Pc[j, k], fr.curv.p[j, k])
    f = jsum(
        jmul(ginv[j, k], F[j, k]) for j in range(4) for k in range(4)
    )
    return F, f, Pc


def iio_tangent_gram(frame):
    """C_jk: the tangential Gram of the trace-free second fundamental form
    (normal indices contracted with the working metric, one tangential pair
    raised)."""
    ff, ex = frame.ff, frame.ex
    n = frame.n
    C = omat(4, 4)
    for j in range(4):
        for k in range(4):
            C[j, k] = _smul(
                ff.E,
                jsum(
                    jmul(jmul(ff.ginv[p, q], ex.IIo[j, p, a]), ex.IIo[k, q, a])
                    for p in range(4)
                    for q in range(4)
                    for a in range(n)
                ),
            )
    return C


def iio_normal_gram(frame):
    """Bhat^{ab}: the normal Gram of the trace-free second fundamental form
    (both tangential pairs raised), scaled so that traces against the
    working metric need one E factor."""
    ff, ex = frame.ff, frame.ex
    n = frame.n
    up = omat(4, 4, n)
    for j in range(4):
        for k in range(4):
            for a in range(n):
                up[j, k, a] = jsum(
                    jmul(jmul(ff.ginv[j, m], ff.ginv[k, p]), ex.IIo[m, p, a])
                    for m in range(4)
                    for p in range(4)
                )
    B = omat(n, n)
    for a in range(n):
        for b in range(n):
            B[a, b] = jsum(
                jmul(up[j, k, a], ex.IIo[j, k, b])
                for j in range(4)
                for k in range(4)
            )
    return B


def fialkow_closed(tf: TractorFrame):
    """Closed form of the Fialkow tensor for a four-dimensional submanifold
    of conformally flat space: F = (C - |IIo|^2 g / 6) / 2 with C the
    tangential Gram of the trace-free second fundamental form."""
    fr = tf.fr
    g, ginv = fr.ff.g, fr.ff.ginv
    C = iio_tangent_gram(fr)
    norm2 = jsum(
        jmul(ginv[j, k], C[j, k]) for j in range(4) for k in range(4)
    )
    F = omat(4, 4)
    for j in range(4):
        for k in range(4):
            F[j, k] = jmul(
                0.5,
                jsub(C[j, k], jmul(1.0 / 6.0, jmul(norm2, g[j, k]))),
            )
    return F


def _apply_step(tf: TractorFrame, U, mode: str):
    """One connection application on a slot-vector field, by mode: 'full'
    is the pulled-back connection, 'checked' the splitting-preserving one,
    'normal' the Ntr-projected connection."""
    mats = tf.omega_checked if mode == "checked" else tf.omega
    out = omat(4, tf.dim)
    for j in range(4):
        for p in range(tf.dim):
            out[j, p] = jadd(
                jdiff(U[p], j),
                jsum(jmul(mats[j][p, q], U[q]) for q in range(tf.dim)),
            )
        if mode == "normal":
            row = mvec(tf.Ntr, out[j])
            for p in range(tf.dim):
                out[j, p] = row[p]
    return out


def connection_commutator(tf: TractorFrame, U, mode: str = "full"):
    """comm[i, j] = the (i, j) curvature commutator applied to the slot
    vector field U.  The symmetric Christoffel terms on the direction
    indices cancel in the antisymmetrization and are omitted."""
    d1 = _apply_step(tf, U, mode)
    d2 = omat(4, 4, tf.dim)
    for j in range(4):
        step = _apply_step(tf, d1[j], mode)
        for i in range(4):
            for p in range(tf.dim):
                d2[i, j, p] = step[i, p]
    comm = omat(4, 4, tf.dim)
    comm[:] = None
    for i in range(4):
        for j in range(4):
            for p in range(tf.dim):
                comm[i, j, p] = jsub(d2[i, j, p], d2[j, i, p])
    return comm


def structure_residuals(tf: TractorFrame) -> dict:
    """Max-norm residuals of the three flat-ambient structure identities.

    codazzi: antisymmetrized checked derivative of the tractor second
    fundamental form; gauss: checked-connection commutator on tangential
    tractors against L+_i L_j - L+_j L_i; ricci: projected-connection
    commutator on normal tractors against L_i L+_j - L_j L+_i.
    """
    if tf.fr.order < 4:
        raise ValueError(
            f"structure residuals need jet order >= 4, got {tf.fr.order}"
        )
    B = tf.width
    L = tf.Lmat
    Ld = [tf.dagger(Lj) for Lj in L]

    Larr = omat(4, tf.dim, tf.dim)
    for j in range(4):
        Larr[j] = L[j]
    DL = tractor_connection(tf, Larr, "lTC", checked=True)
    codazzi = 0.0
    for i in range(4):
        for j in range(i):
            for p in range(tf.dim):
                for q in range(tf.dim):
                    codazzi = max(
                        codazzi,
                        float(np.max(np.abs(jbase(
                            jsub(DL[i, j, p, q], DL[j, i, p, q]), B
                        )))),
                    )

    pred_g = {}
    pred_n = {}
    for i in range(4):
        for j in range(i):
            pred_g[i, j] = msub(mdot(Ld[i], L[j]), mdot(Ld[j], L[i]))
            pred_n[i, j] = msub(mdot(L[i], Ld[j]), mdot(L[j], Ld[i]))

    gauss = 0.0
    ricci = 0.0
    for P in range(tf.dim):
        U = tf.Pitr[:, P]
        comm = connection_commutator(tf, U, "checked")
        for i in range(4):
            for j in range(i):
                want = mvec(pred_g[i, j], U)
                for p in range(tf.dim):
                    gauss = max(
                        gauss,
                        float(np.max(np.abs(jbase(
                            jsub(comm[i, j, p], want[p]), B
                        )))),
                    )
        U = tf.Ntr[:, P]
        comm = connection_commutator(tf, U, "normal")
        for i in range(4):
            for j in range(i):
                want = mvec(pred_n[i, j], U)
                for p in range(tf.dim):
                    ricci = max(
                        ricci,
                        float(np.max(np.abs(jbase(
                            jsub(comm[i, j, p], want[p]), B
                        )))),
                    )
    return {"codazzi": codazzi, "gauss": gauss, "ricci": ricci}


def _jsqrt(x):
    if x is None:
        return None
    if isinstance(x, float):
        return math.sqrt(x)
    return jet_apply("sqrt", x)


def ttrans_matrix(tf1: TractorFrame, tf2: TractorFrame):
    """Slot transformation between two working scales over the same chart
    points: components of a weight-0 invariant tractor satisfy U2 = T U1.

    The map is the classical corner rearrangement by the gradient
    difference, conjugated by the per-scale weight factors of the stored
    slots (top slot weight +1, raised middle and bottom slots weight -1):
    T = diag(e^{w2}, e^{-w2}, e^{-w2}) G diag(e^{-w1}, e^{w1}, e^{w1}) with
    E_i = e^{2 w_i}.  It intertwines the two pulled-back connections and
    preserves the pairing.
    """
    n, dim = tf1.n, tf1.dim
    ups1, ups2 = tf1.fr.ups, tf2.fr.ups
    Up = [jsub(ups2[a], ups1[a]) for a in range(n)]
    up2 = jsum(jmul(Up[a], Up[a]) for a in range(n))
    s = _jsqrt(jmul(tf2.E, tf1.Einv))
    sinv = _jsqrt(jmul(tf1.E, tf2.Einv))
    gm = _jsqrt(jmul(tf1.Einv, tf2.Einv))
    T = omat(dim, dim)
    T[:] = None
    T[0, 0] = s
    T[dim - 1, dim - 1] = sinv
    for a in range(n):
        T[1 + a, 1 + a] = sinv
        T[1 + a, 0] = _smul(gm, Up[a])
        T[dim - 1, 1 + a] = jneg(_smul(sinv, Up[a]))
    T[dim - 1, 0] = jmul(-0.5, _smul(gm, up2))
    return T
