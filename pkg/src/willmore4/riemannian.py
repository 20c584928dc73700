"""Ambient and intrinsic Riemannian data of an immersion, in jet arithmetic.

The ambient metric is always e^{2 omega} times the flat metric, with omega
one of the built-in scale functions (zero, linear, trigonometric table, or
the pullback of another scale under a conformal motion). All tensors are
held componentwise in flat ambient coordinates and chart coordinates, as
object arrays whose entries are Jets, floats, or None (structural zeros);
index raising on ambient slots therefore carries explicit factors of
E = e^{2 omega}.

Derivatives along the chart consume jet order; closed-form ambient data
(omega, its gradient, the ambient Schouten tensor) are evaluated directly
at the immersion jets and lose nothing. The Frame class wires the whole
pipeline together at one batch of chart points with an eager truncation
schedule, so each stage is computed at the lowest order its consumers need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._alg import jadd, jbase, jdiff, jmul, jneg, jsub, jsum, jtarget, jtrunc, omat
from .jets import Jet, jet_apply

#: condition-number ceiling for the induced metric
MAX_METRIC_COND = 1e10

_EYE4 = tuple(tuple(np.eye(4, dtype=int)[i]) for i in range(4))


# -- ambient scale functions ---------------------------------------------------


@dataclass(frozen=True)
class AmbientScale:
    """Scale function omega on ambient space, evaluable (with its first two
    derivative arrays) at ambient point jets."""

    kind: str
    params: dict

    def omega(self, x: list):
        """omega at the point as a Jet (or None when identically zero)."""
        if self.kind == "zero":
            return None
        if self.kind == "linear":
            a = self.params["a"]
            return jsum(float(aa) * xa for aa, xa in zip(a, x) if aa != 0.0)
        if self.kind == "trig":
            terms = []
            for t in self.params["terms"]:
                arg = _trig_arg(t, x)
                if arg is None:
                    terms.append(t["amp"] * math.cos(t["phase"]))
                else:
                    terms.append(t["amp"] * jet_apply("cos", arg))
            return jsum(terms)
        base, stage = self.params["base"], self.params["stage"]
        from .conformal import log_conformal_factor, motion_jets

        return jadd(
            base.omega(motion_jets(stage, x)), log_conformal_factor(stage, x)
        )

    def upsilon(self, x: list) -> list:
        """Gradient of omega at the point: a length-n list over {None, float,
        Jet}."""
        n = len(x)
        if self.kind == "zero":
            return [None] * n
        if self.kind == "linear":
            return [float(aa) if aa != 0.0 else None for aa in self.params["a"]]
        if self.kind == "trig":
            ups = [None] * n
            for t in self.params["terms"]:
                arg = _trig_arg(t, x)
                if arg is None:
                    continue
                msin = (-t["amp"]) * jet_apply("sin", arg)
                for a, k in enumerate(t["k"]):
                    if k != 0.0:
                        ups[a] = jadd(ups[a], float(k) * msin)
            return ups
        return self._pullback_grad(x)[0]

    def dupsilon(self, x: list):
        """Hessian of omega at the point: (n, n) object array."""
        n = len(x)
        out = omat(n, n)
        out[:] = None
        if self.kind == "zero" or self.kind == "linear":
            return out
        if self.kind == "trig":
            for t in self.params["terms"]:
                arg = _trig_arg(t, x)
                if arg is None:
                    continue
                mcos = (-t["amp"]) * jet_apply("cos", arg)
                k = t["k"]
                for a in range(n):
                    if k[a] == 0.0:
                        continue
                    for b in range(a, n):
                        if k[b] == 0.0:
                            continue
                        term = (float(k[a]) * float(k[b])) * mcos
                        out[a, b] = jadd(out[a, b], term)
                        if b != a:
                            out[b, a] = out[a, b]
            return out
        return self._pullback_grad(x)[1]

    def _pullback_grad(self, x: list):
        """Gradient and Hessian of a single-stage pullback scale by the
        chain rule through the stage map."""
        base, stage = self.params["base"], self.params["stage"]
        from .conformal import motion_jets

        n = len(x)
        y = motion_jets(stage, x)
        ups0 = base.upsilon(y)
        dups0 = base.dupsilon(y)
        J, T, gl, hl = _stage_derivatives(stage, x)

        ups = []
        for a in range(n):
            terms = [jmul(J[b, a], ups0[b]) for b in range(n)]
            terms.append(gl[a])
            ups.append(jsum(terms))

        dups = omat(n, n)
        for a in range(n):
            for b in range(a, n):
                terms = []
                for c in range(n):
                    terms.append(jmul(T[c][a][b] if T is not None else None,
                                      ups0[c]))
                    for d in range(n):
                        terms.append(
                            jmul(jmul(J[c, b], J[d, a]), dups0[d, c])
                        )
                terms.append(hl[a][b] if hl is not None else None)
                dups[a, b] = jsum(terms)
                dups[b, a] = dups[a, b]
        return ups, dups


def _trig_arg(term: dict, x: list):
    """k . x + phase for one trigonometric term, or None when k = 0."""
    arg = jsum(float(k) * xa for k, xa in zip(term["k"], x) if k != 0.0)
    if arg is None:
        return None
    if term["phase"]:
        arg = arg + term["phase"]
    return arg


def _stage_derivatives(stage, x: list):
    """(J, T, grad log Lambda, hess log Lambda) for one elementary motion:
    J[b, a] = d phi^b / d x_a, T[c][a][b] = d_a J^c_b."""
    n = len(x)
    kind, par = stage.kind, stage.params
    J = omat(n, n)
    J[:] = None
    if kind == "translation":
        for a in range(n):
            J[a, a] = 1.0
        return J, None, [None] * n, None
    if kind == "rotation":
        R = par["R"]
        for b in range(n):
            for a in range(n):
                if R[b, a] != 0.0:
                    J[b, a] = float(R[b, a])
        return J, None, [None] * n, None
    if kind == "dilation":
        lam = par["factor"]
        for a in range(n):
            J[a, a] = lam
        return J, None, [None] * n, None
    # inversion about center c: phi = c + d / |d|^2
    c = par["center"]
    d = [xa - float(ca) for xa, ca in zip(x, c)]
    s = jsum(da * da for da in d)
    r = jet_apply("recip", s)
    r2 = r * r
    r3 = r2 * r
    for b in range(n):
        for a in range(n):
            term = jneg(jmul(2.0, d[a] * d[b] * r2))
            if a == b:
                term = jadd(term, r)
            J[b, a] = term
    T = [[[None] * n for _ in range(n)] for _ in range(n)]
    for cc in range(n):
        for a in range(n):
            for b in range(n):
                acc = 8.0 * (d[a] * d[b] * d[cc]) * r3
                if b == cc:
                    acc = acc - 2.0 * d[a] * r2
                if a == b:
                    acc = acc - 2.0 * d[cc] * r2
                if a == cc:
                    acc = acc - 2.0 * d[b] * r2
                T[cc][a][b] = acc
    gl = [(-2.0) * (da * r) for da in d]
    hl = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            term = 4.0 * (d[a] * d[b] * r2)
            if a == b:
                term = term - 2.0 * r
            hl[a][b] = term
    return J, T, gl, hl


def scale_zero() -> AmbientScale:
    return AmbientScale("zero", {})


def scale_linear(a) -> AmbientScale:
    a = np.asarray(a, dtype=np.float64)
    return AmbientScale("linear", {"a": tuple(float(v) for v in a)})


def scale_trig(terms) -> AmbientScale:
    clean = []
    for t in terms:
        clean.append(
            {
                "amp": float(t["amp"]),
                "k": tuple(float(v) for v in t["k"]),
                "phase": float(t.get("phase", 0.0)),
            }
        )
    return AmbientScale("trig", {"terms": tuple(clean)})


def scale_pullback(base: AmbientScale, motion) -> AmbientScale:
    """The scale whose representative metric is the pullback of base's under
    the motion: omega' = omega(phi x) + log Lambda_phi(x)."""
    from .conformal import _stages

    scale = base
    for stage in reversed(_stages(motion)):
        scale = AmbientScale("pullback", {"base": scale, "stage": stage})
    return scale


def scale_from_dict(d: dict) -> AmbientScale:
    kind = d["kind"]
    if kind == "zero":
        return scale_zero()
    if kind == "linear":
        return scale_linear(d["a"])
    if kind == "trig":
        return scale_trig(d["terms"])
    raise ValueError(f"unknown ambient scale kind {kind!r}")


# -- first fundamental data -----------------------------------------------------


class FirstFundamental:
    """Pushforward, induced metric and inverse, area density, normal
    projector, and the conformal factor E = e^{2 omega} along the surface."""

    def __init__(self, pi, g, ginv, detg, sqrt_detg, normal, E, Einv):
        self.pi = pi  # (n, 4): d iota^a / d theta^i
        self.g = g  # (4, 4)
        self.ginv = ginv  # (4, 4)
        self.detg = detg
        self.sqrt_detg = sqrt_detg
        self.normal = normal  # (n, n): N^a_b
        self.E = E  # e^{2 omega} (float 1.0 when omega = 0)
        self.Einv = Einv

    @property
    def n(self) -> int:
        return self.pi.shape[0]


def _det4_and_adjugate(g):
    """Determinant and adjugate of a symmetric 4x4 of scalars by cofactor
    expansion (exact in jet arithmetic)."""
    idx = range(4)

    def minor3(rows, cols):
        (r0, r1, r2), (c0, c1, c2) = rows, cols
        return jsum(
            [
                jmul(g[r0, c0], jsub(jmul(g[r1, c1], g[r2, c2]),
                                     jmul(g[r1, c2], g[r2, c1]))),
                jneg(jmul(g[r0, c1], jsub(jmul(g[r1, c0], g[r2, c2]),
                                          jmul(g[r1, c2], g[r2, c0])))),
                jmul(g[r0, c2], jsub(jmul(g[r1, c0], g[r2, c1]),
                                     jmul(g[r1, c1], g[r2, c0]))),
            ]
        )

    adj = omat(4, 4)
    for i in idx:
        rows = tuple(r for r in idx if r != i)
        for j in idx:
            cols = tuple(c for c in idx if c != j)
            cof = minor3(rows, cols)
            if (i + j) % 2:
                cof = jneg(cof)
            adj[j, i] = cof  # transpose of the cofactor matrix
    det = jsum(jmul(g[0, j], adj[j, 0]) for j in idx)
    return det, adj


def first_fundamental(x: list, scale: AmbientScale | None = None) -> FirstFundamental:
    """First-order data of the immersion from its jets (order >= 1)."""
    n = len(x)
    if n < 5:
        raise ValueError(f"ambient dimension must be at least 5, got {n}")
    width = x[0].width

    pi = omat(n, 4)
    for a in range(n):
        for i in range(4):
            pi[a, i] = x[a].diff(i)

    if scale is None or scale.kind == "zero":
        E, Einv = 1.0, 1.0
    else:
        om = scale.omega(x)
        if om is None:
            E, Einv = 1.0, 1.0
        else:
            E = jet_apply("exp", 2.0 * om)
            Einv = jet_apply("recip", E)

    g = omat(4, 4)
    for i in range(4):
        for j in range(i, 4):
            gij = jmul(E, jsum(pi[a, i] * pi[a, j] for a in range(n)))
            g[i, j] = gij
            g[j, i] = gij

    gbase = np.array([[jbase(g[i, j], width) for j in range(4)] for i in range(4)])
    gbase = np.moveaxis(gbase, -1, 0)  # (B, 4, 4)
    eigs = np.linalg.eigvalsh(gbase)
    cond = eigs[:, -1] / np.maximum(eigs[:, 0], 1e-300)
    if np.any(eigs[:, 0] <= 0.0) or np.any(cond > MAX_METRIC_COND):
        b = int(np.argmax(np.where(eigs[:, 0] <= 0.0, np.inf, cond)))
        raise ValueError(
            f"induced metric is singular or ill-conditioned "
            f"(eigenvalues {eigs[b].tolist()})"
        )

    detg, adj = _det4_and_adjugate(g)
    inv_det = jet_apply("recip", detg)
    ginv = omat(4, 4)
    for i in range(4):
        for j in range(i, 4):
            ginv[i, j] = adj[i, j] * inv_det
            ginv[j, i] = ginv[i, j]
    sqrt_detg = jet_apply("sqrt", detg)

    # V^a_j = Pi^a_i g^{ij}; N^a_b = delta - E V^a_j Pi^b_j
    V = omat(n, 4)
    for a in range(n):
        for j in range(4):
            V[a, j] = jsum(pi[a, i] * ginv[i, j] for i in range(4))
    normal = omat(n, n)
    for a in range(n):
        for b in range(a, n):
            s = jmul(E, jsum(V[a, j] * pi[b, j] for j in range(4)))
            nb = jneg(s)
            if a == b:
                nb = jadd(nb, 1.0)
            normal[a, b] = nb
            normal[b, a] = nb
    return FirstFundamental(pi, g, ginv, detg, sqrt_detg, normal, E, Einv)


# -- extrinsic data --------------------------------------------------------------


class Extrinsic:
    """Second fundamental form, mean curvature, and umbilicity tensor."""

    def __init__(self, II, H, IIo):
        self.II = II  # (4, 4, n), symmetric in the first two slots
        self.H = H  # (n,)
        self.IIo = IIo  # (4, 4, n)


def extrinsic(
    x: list,
    scale: AmbientScale | None = None,
    ff: FirstFundamental | None = None,
    dd=None,
) -> Extrinsic:
    """Second-order data (jets of order >= 2). dd may carry precomputed
    second derivatives d^2 iota^a / d theta^i d theta^j as a (n, 4, 4)
    object array."""
    n = len(x)
    if ff is None:
        ff = first_fundamental(x, scale)
    if dd is None:
        dd = omat(n, 4, 4)
        for a in range(n):
            for i in range(4):
                di = x[a].diff(i)
                for j in range(i, 4):
                    dd[a, i, j] = di.diff(j)
                    dd[a, j, i] = dd[a, i, j]

    ups = scale.upsilon(x) if scale is not None else [None] * n
    # u_i = Upsilon_a Pi^a_i ; w_ij = delta_ab Pi^a_i Pi^b_j = g_ij / E
    u = [jsum(jmul(ups[a], ff.pi[a, i]) for a in range(n)) for i in range(4)]
    w = omat(4, 4)
    for i in range(4):
        for j in range(i, 4):
            w[i, j] = jmul(ff.Einv, ff.g[i, j])
            w[j, i] = w[i, j]

    II = omat(4, 4, n)
    for i in range(4):
        for j in range(i, 4):
            raw = []
            for b in range(n):
                t = dd[b, i, j]
                t = jadd(t, jmul(u[i], ff.pi[b, j]))
                t = jadd(t, jmul(u[j], ff.pi[b, i]))
                t = jsub(t, jmul(w[i, j], ups[b]))
                raw.append(t)
            for a in range(n):
                comp = jsum(jmul(ff.normal[a, b], raw[b]) for b in range(n))
                II[i, j, a] = comp
                II[j, i, a] = comp

    H = omat(n)
    for a in range(n):
        H[a] = jmul(
            0.25,
            jsum(ff.ginv[i, j] * II[i, j, a] for i in range(4) for j in range(4)),
        )
    IIo = omat(4, 4, n)
    for i in range(4):
        for j in range(i, 4):
            for a in range(n):
                IIo[i, j, a] = jsub(II[i, j, a], jmul(ff.g[i, j], H[a]))
                IIo[j, i, a] = IIo[i, j, a]
    return Extrinsic(II, H, IIo)


# -- intrinsic curvature ----------------------------------------------------------


class IntrinsicCurv:
    """Christoffels, Riemann (mixed and lowered), Ricci, scalar, Schouten,
    its trace, and the Weyl part, all of the induced metric."""

    def __init__(self, gamma, riem, riem_low, ric, scal, p, jay, weyl):
        self.gamma = gamma  # (4, 4, 4): Gamma^k_ij
        self.riem = riem  # (4, 4, 4, 4): r_ij^k_l
        self.riem_low = riem_low  # (4, 4, 4, 4): r_ijkl
        self.ric = ric  # (4, 4)
        self.scal = scal
        self.p = p  # (4, 4)
        self.jay = jay
        self.weyl = weyl  # (4, 4, 4, 4)


def intrinsic_curvature(ff: FirstFundamental) -> IntrinsicCurv:
    """Curvature of the induced metric from its jets. The curvature sign
    convention is fixed by [D_i, D_j] v^k = r_ij^k_l v^l; Ricci contracts
    the first and third slots, and the Schouten tensor in dimension four is
    p = (ric - (scal/6) g) / 2."""
    g, ginv = ff.g, ff.ginv

    dg = omat(4, 4, 4)  # dg[k][i][j] = d_k g_ij
    for k in range(4):
        for i in range(4):
            for j in range(i, 4):
                dg[k, i, j] = jdiff(g[i, j], k)
                dg[k, j, i] = dg[k, i, j]

    gamma = omat(4, 4, 4)  # Gamma^k_ij
    for i in range(4):
        for j in range(i, 4):
            for k in range(4):
                acc = jsum(
                    jmul(
                        ginv[k, l],
                        jsub(jadd(dg[i, j, l], dg[j, i, l]), dg[l, i, j]),
                    )
                    for l in range(4)
                )
                gamma[k, i, j] = jmul(0.5, acc)
                gamma[k, j, i] = gamma[k, i, j]

    riem = omat(4, 4, 4, 4)  # r_ij^k_l
    riem[:] = None
    rt = jtarget(gamma)
    gl = np.empty_like(gamma)
    for idx in np.ndindex(gamma.shape):
        gl[idx] = jtrunc(gamma[idx], rt)
    for i in range(4):
        for j in range(i + 1, 4):
            for k in range(4):
                for l in range(4):
                    term = jsub(jdiff(gamma[k, j, l], i), jdiff(gamma[k, i, l], j))
                    term = jadd(
                        term,
                        jsum(gl[k, i, m] * gl[m, j, l] for m in range(4)),
                    )
                    term = jsub(
                        term,
                        jsum(gl[k, j, m] * gl[m, i, l] for m in range(4)),
                    )
                    riem[i, j, k, l] = term
                    riem[j, i, k, l] = jneg(term)

    riem_low = omat(4, 4, 4, 4)
    riem_low[:] = None
    for i in range(4):
        for j in range(i + 1, 4):
            for k in range(4):
                for l in range(4):
                    low = jsum(jmul(g[k, m], riem[i, j, m, l]) for m in range(4))
                    riem_low[i, j, k, l] = low
                    riem_low[j, i, k, l] = jneg(low)

    ric = omat(4, 4)
    for j in range(4):
        for l in range(j, 4):
            ric[j, l] = jsum(riem[k, j, k, l] for k in range(4))
            ric[l, j] = ric[j, l]
    scal = jsum(jmul(ginv[j, l], ric[j, l]) for j in range(4) for l in range(4))

    p = omat(4, 4)
    for j in range(4):
        for l in range(j, 4):
            p[j, l] = jmul(0.5, jsub(ric[j, l], jmul(1.0 / 6.0, jmul(scal, g[j, l]))))
            p[l, j] = p[j, l]
    jay = jsum(jmul(ginv[j, l], p[j, l]) for j in range(4) for l in range(4))

    weyl = omat(4, 4, 4, 4)
    weyl[:] = None
    for i in range(4):
        for j in range(i + 1, 4):
            for k in range(4):
                for l in range(4):
                    glue = jsub(
                        jadd(jmul(g[i, k], p[j, l]), jmul(g[j, l], p[i, k])),
                        jadd(jmul(g[j, k], p[i, l]), jmul(g[i, l], p[j, k])),
                    )
                    w = jsub(riem_low[i, j, k, l], glue)
                    weyl[i, j, k, l] = w
                    weyl[j, i, k, l] = jneg(w)
    return IntrinsicCurv(gamma, riem, riem_low, ric, scal, p, jay, weyl)


# -- ambient Schouten --------------------------------------------------------------


def ambient_schouten(scale: AmbientScale | None, x: list):
    """Schouten tensor of e^{2 omega} delta in flat lower components:
    P_ab = -d_a Upsilon_b + Upsilon_a Upsilon_b - (1/2) delta_ab |Upsilon|^2
    (the flat base has P = 0)."""
    n = len(x)
    P = omat(n, n)
    P[:] = None
    if scale is None or scale.kind == "zero":
        return P
    ups = scale.upsilon(x)
    dups = scale.dupsilon(x)
    ups2 = jsum(jmul(ua, ua) for ua in ups)
    for a in range(n):
        for b in range(a, n):
            term = jneg(dups[a, b])
            term = jadd(term, jmul(ups[a], ups[b]))
            if a == b:
                term = jsub(term, jmul(0.5, ups2))
            P[a, b] = term
            P[b, a] = term
    return P


# -- covariant derivative -----------------------------------------------------------


def covariant_D(comp, kinds: str, frame) -> np.ndarray:
    """Coupled covariant derivative of a componentwise tensor field.

    kinds is a string over {'l','u','n','a','b','s'}: lower/upper tangent,
    normal-bundle upper (ambient components, projected), ambient upper,
    ambient lower, spectator (no connection action; used for axes whose
    correction the caller supplies, e.g. tractor slots). Output prepends one
    lower tangent index: out[(j,) + idx] = D_j comp[idx]. Scalars: kinds = "".
    """
    if not isinstance(comp, np.ndarray):
        arr = omat(1)
        arr[0] = comp
        comp = arr.reshape(())
    if len(kinds) != comp.ndim:
        raise ValueError(f"kinds {kinds!r} does not match array rank {comp.ndim}")
    gamma = frame.curv.gamma if any(k in "lu" for k in kinds) else None
    amb = frame.amb_gamma if any(k in "nab" for k in kinds) else None
    N = frame.ff.normal
    n = frame.ff.n
    tgt = jtarget(comp)

    def tm(a, b):
        return jmul(jtrunc(a, tgt), jtrunc(b, tgt))

    out = omat(4, *comp.shape)
    for j in range(4):
        for idx in np.ndindex(comp.shape):
            term = jdiff(comp[idx], j)
            for s, kind in enumerate(kinds):
                v = idx[s]
                if kind == "u":
                    term = jadd(
                        term,
                        jsum(
                            tm(gamma[v, j, m], comp[idx[:s] + (m,) + idx[s + 1:]])
                            for m in range(4)
                        ),
                    )
                elif kind == "l":
                    term = jsub(
                        term,
                        jsum(
                            tm(gamma[m, j, v], comp[idx[:s] + (m,) + idx[s + 1:]])
                            for m in range(4)
                        ),
                    )
                elif kind in ("n", "a"):
                    term = jadd(
                        term,
                        jsum(
                            tm(amb[v][c][j], comp[idx[:s] + (c,) + idx[s + 1:]])
                            for c in range(n)
                        ),
                    )
                elif kind == "b":
                    term = jsub(
                        term,
                        jsum(
                            tm(amb[c][v][j], comp[idx[:s] + (c,) + idx[s + 1:]])
                            for c in range(n)
                        ),
                    )
                elif kind == "s":
                    pass
                else:
                    raise ValueError(f"unknown index kind {kind!r}")
            out[(j,) + idx] = term

    # project each normal-bundle slot
    for s, kind in enumerate(kinds):
        if kind != "n":
            continue
        proj = omat(*out.shape)
        axis = 1 + s
        for idx in np.ndindex(out.shape):
            a = idx[axis]
            proj[idx] = jsum(
                jmul(N[a, b], out[idx[:axis] + (b,) + idx[axis + 1:]])
                for b in range(n)
            )
        out = proj
    return out


# -- the per-point pipeline frame ------------------------------------------------


class Frame:
    """All geometric data at one batch of chart points, computed lazily with
    an eager truncation schedule: writing K for the seed order, the
    pushforward keeps K-1, the metric family max(K-2, 2), extrinsic data
    K-2, Christoffels one less, and curvature two less than the metric.
    Closed-form ambient data is evaluated at the metric's order."""

    def __init__(self, spec, p, order: int, _x=None):
        if order < 3:
            raise ValueError(f"frame needs jet order >= 3, got {order}")
        from .surfaces import eval_jets

        self.spec = spec
        self.order = order
        self.scale = spec.ambient_scale
        self.x = [jtrunc(xa, order) for xa in _x] if _x is not None \
            else eval_jets(spec, p, order)
        self.width = self.x[0].width
        self.n = len(self.x)
        self._cache = {}

    def _get(self, name, builder):
        if name not in self._cache:
            self._cache[name] = builder()
        return self._cache[name]

    @property
    def ff_order(self) -> int:
        return max(self.order - 2, 2)

    @property
    def pi_full(self):
        """(n, 4) pushforward at full order K-1 (source of second
        derivatives)."""

        def build():
            pi = omat(self.n, 4)
            for a in range(self.n):
                for i in range(4):
                    pi[a, i] = self.x[a].diff(i)
            return pi

        return self._get("pi_full", build)

    @property
    def x_ff(self):
        """Immersion jets truncated to the metric order (closed-form scale
        data is evaluated on these)."""
        return self._get(
            "x_ff", lambda: [jtrunc(xa, self.ff_order) for xa in self.x]
        )

    @property
    def ff(self) -> FirstFundamental:
        return self._get(
            "ff", lambda: first_fundamental(
                [jtrunc(xa, self.ff_order + 1) for xa in self.x], self.scale
            )
        )

    @property
    def dd(self):
        """(n, 4, 4) second chart derivatives at order K-2."""

        def build():
            dd = omat(self.n, 4, 4)
            pi = self.pi_full
            for a in range(self.n):
                for i in range(4):
                    for j in range(i, 4):
                        dd[a, i, j] = pi[a, i].diff(j)
                        dd[a, j, i] = dd[a, i, j]
            return dd

        return self._get("dd", build)

    @property
    def ex(self) -> Extrinsic:
        return self._get(
            "ex", lambda: extrinsic(self.x_ff, self.scale, self.ff, self.dd)
        )

    @property
    def curv(self) -> IntrinsicCurv:
        return self._get("curv", lambda: intrinsic_curvature(self.ff))

    @property
    def ups(self):
        return self._get(
            "ups",
            lambda: self.scale.upsilon(self.x_ff)
            if self.scale is not None
            else [None] * self.n,
        )

    @property
    def P_amb(self):
        return self._get(
            "P_amb", lambda: ambient_schouten(self.scale, self.x_ff)
        )

    @property
    def amb_gamma(self):
        """amb[a][c][j] = Gammatilde^a_{c d} Pi^d_j, the ambient Christoffel
        of e^{2 omega} delta contracted with the pushforward."""

        def build():
            n = self.n
            pi, ups = self.ff.pi, self.ups
            u = [
                jsum(jmul(ups[a], pi[a, i]) for a in range(n)) for i in range(4)
            ]
            amb = [[[None] * 4 for _ in range(n)] for _ in range(n)]
            if all(v is None for v in ups):
                return amb
            for a in range(n):
                for c in range(n):
                    for j in range(4):
                        term = jmul(ups[c], pi[a, j])
                        if a == c:
                            term = jadd(term, u[j])
                        term = jsub(term, jmul(ups[a], pi[c, j]))
                        amb[a][c][j] = term
            return amb

        return self._get("amb_gamma", build)

    def D(self, comp, kinds: str):
        return covariant_D(comp, kinds, self)
