"""Tractor-calculus tests against closed-form oracles and cross-routes.

The slot pairing, the pulled-back connection, the normal injector and the
complementary projectors are pinned on the round sphere and flat tori; the
tractor second fundamental form is computed by two independent routes that
must agree on every family and scale; the checked connection, the Fialkow
comparison, the Gauss/Codazzi/Ricci structure identities, the tangent
contorsion reconstruction, and the scale transformation of slot components
are all verified in jet arithmetic at random chart points.
"""

import math

import numpy as np
import pytest

from willmore4._alg import jadd, jbase, jdiff, jmul, jneg, jsub, jsum, omat
from willmore4.riemannian import Frame, scale_linear, scale_trig
from willmore4.surfaces import builtin_family
from willmore4.tractor import (
    MixedField,
    TractorFrame,
    checked_derivative,
    checked_sandwich,
    component_max,
    connection_commutator,
    fialkow,
    fialkow_closed,
    madd,
    mdot,
    msub,
    mtrace,
    mvec,
    normal_tractor_injector,
    structure_residuals,
    tractor_connection,
    tractor_projectors,
    tractor_sff_direct,
    tractor_sff_split,
    ttrans_matrix,
)

RNG = np.random.default_rng(20240518)

B = 3
TOL = 1e-9


def torus(radii=(1.0, 1.3, 0.8, 1.1)):
    return builtin_family("product_torus", {"radii": radii, "n": 8})


def sphere(r=1.3, n=5):
    return builtin_family("round_sphere", {"radius": r, "n": n})


def graph(n=7, terms=None):
    if terms is None:
        terms = (
            {"axis": 5, "amp": 0.11, "k": (1, 1, 0, 0)},
            {"axis": 6, "amp": 0.07, "k": (0, 1, -1, 0), "phase": 0.3},
            {"axis": 7, "amp": 0.05, "k": (1, 0, 0, 2)},
        )
    return builtin_family("trig_graph_torus", {"n": n, "terms": terms})


def box_points(count, lo=0.15, hi=2 * math.pi - 0.15, rng=RNG):
    return rng.uniform(lo, hi, size=(4, count))


def sphere_points(count, rng=RNG):
    cols = rng.uniform(0.3, math.pi - 0.3, size=(3, count))
    az = rng.uniform(0.0, 2 * math.pi, size=(1, count))
    return np.concatenate([cols, az])


SCALES = {
    None: None,
    "lin5": scale_linear([0.04, -0.02, 0.03, 0.01, -0.03]),
    "lin7": scale_linear([0.04, -0.02, 0.03, 0.01, -0.03, 0.02, 0.05]),
    "trig7": scale_trig(
        [
            {"amp": 0.08, "k": (1, 0, 0, 0, 0, 0, 0)},
            {"amp": 0.05, "k": (0, 1, -1, 0, 0.5, 0, 0), "phase": 0.7},
        ]
    ),
    "cos7": scale_trig([{"amp": 0.05, "k": (1, 0, 0, 0, 0, 0, 0)}]),
    "trig8": scale_trig(
        [
            {"amp": 0.08, "k": (1, 0, 0, 0, 0, 0, 0, 0)},
            {"amp": 0.05, "k": (0, 1, -1, 0, 0.5, 0, 0, 0), "phase": 0.7},
        ]
    ),
}

_CACHE = {}


def frame(family, scale=None, order=4, count=B):
    key = (family, scale, order, count)
    if key not in _CACHE:
        rng = np.random.default_rng(1000 * count + hashkey(family))
        if family == "sphere":
            spec, pts = sphere(), sphere_points(count, rng)
        elif family == "torus":
            spec, pts = torus(), box_points(count, rng=rng)
        else:
            spec, pts = graph(), box_points(count, rng=rng)
        sc = SCALES[scale]
        if sc is not None:
            spec = spec.with_scale(sc)
        _CACHE[key] = Frame(spec, pts, order)
    return _CACHE[key]


def hashkey(family):
    return {"sphere": 11, "torus": 12, "graph": 13}[family]


def tfr(family, scale=None, order=4, count=B):
    key = ("tractor", family, scale, order, count)
    if key not in _CACHE:
        _CACHE[key] = TractorFrame(frame(family, scale, order, count))
    return _CACHE[key]


def mb(arr, count=B):
    return component_max(np.asarray(arr, dtype=object), count)


def varying_field(tf, shift=0):
    x = tf.fr.x
    U = omat(tf.dim)
    for p in range(tf.dim):
        U[p] = x[(p + shift) % tf.n]
    return U


def constant_field(tf, rng=RNG):
    U = omat(tf.dim)
    for p in range(tf.dim):
        U[p] = float(rng.normal())
    return U


ROUTE_CASES = [
    ("sphere", None),
    ("sphere", "lin5"),
    ("torus", None),
    ("torus", "trig8"),
    ("graph", None),
    ("graph", "lin7"),
    ("graph", "trig7"),
]


class TestSlotMetric:
    def test_signature_one_negative_eigenvalue(self):
        tf = tfr("graph", "trig7")
        dim = tf.dim
        W = RNG.normal(size=(dim, dim))
        gram = np.empty((dim, dim, B))
        for i in range(dim):
            for j in range(dim):
                gram[i, j] = jbase(
                    tf.pair(
                        np.array(list(W[i]), dtype=object),
                        np.array(list(W[j]), dtype=object),
                    ),
                    B,
                )
        for b in range(B):
            ev = np.linalg.eigvalsh(gram[:, :, b])
            assert int(np.sum(ev < 0)) == 1

    @pytest.mark.parametrize("scale", [None, "lin7", "trig7"])
    def test_connection_annihilates_slot_metric(self, scale):
        tf = tfr("graph", scale)
        assert mb(tractor_connection(tf, tf.h, "CC")) < 1e-10

    def test_connection_is_pairing_compatible(self):
        tf = tfr("graph", "trig7")
        U, V = varying_field(tf), varying_field(tf, shift=3)
        DU = tractor_connection(tf, U, "T")
        DV = tractor_connection(tf, V, "T")
        for j in range(4):
            resid = jsub(
                jdiff(tf.pair(U, V), j),
                jadd(tf.pair(DU[j], V), tf.pair(U, DV[j])),
            )
            assert float(np.max(np.abs(jbase(resid, B)))) < TOL


class TestConnection:
    def test_canonical_tractor_derivative_is_middle_insertion(self):
        # at the flat scale the derivative of X = (0, ..., 0, 1) is the
        # pushforward slot vector, one direction at a time
        tf = tfr("graph")
        DX = tractor_connection(tf, tf.X, "T")
        for j in range(4):
            assert mb(msub(DX[j], tf.Ztil[j])) < TOL

    @pytest.mark.parametrize("scale", [None, "lin7", "trig7"])
    def test_flat_ambient_curvature_vanishes(self, scale):
        tf = tfr("graph", scale)
        for U in (constant_field(tf), varying_field(tf)):
            comm = connection_commutator(tf, U, "full")
            assert mb(comm) < 1e-8


class TestInjector:
    def test_minimal_scale_kills_bottom_slot(self):
        spec = graph()
        p0 = RNG.uniform(0.4, 5.8, size=(4, 1))
        fr0 = Frame(spec, p0, 3)
        a = [float(jbase(fr0.ex.H[c], 1)[0]) for c in range(7)]
        tf = TractorFrame(Frame(spec.with_scale(scale_linear(a)), p0, 3))
        inj = normal_tractor_injector(tf)
        for c in range(7):
            assert float(np.max(np.abs(jbase(fr0.ex.H[c], 1)))) >= 0.0
            assert (
                float(np.max(np.abs(jbase(inj[tf.dim - 1, c], 1)))) < 1e-12
            )

    def test_sphere_bottom_slot_is_curvature_over_radius(self):
        tf = tfr("sphere")
        r = 1.3
        outward = [jmul(1.0 / r, tf.fr.x[a]) for a in range(5)]
        U = tf.inject(outward)
        rho = jbase(U[tf.dim - 1], B)
        np.testing.assert_allclose(np.abs(rho), 1.0 / r, atol=TOL)
        np.testing.assert_allclose(rho, -1.0 / r, atol=TOL)

    def test_injected_pairing_is_normal_inner_product(self):
        tf = tfr("graph", "trig7")
        fr = tf.fr
        N, E = fr.ff.normal, tf.E
        u = mvec(N, np.array([fr.x[a] for a in range(7)], dtype=object))
        v = mvec(N, np.array([fr.x[(a + 2) % 7] for a in range(7)], dtype=object))
        lhs = tf.pair(tf.inject(u), tf.inject(v))
        rhs = jmul(E, jsum(jmul(u[a], v[a]) for a in range(7)))
        assert float(np.max(np.abs(jbase(jsub(lhs, rhs), B)))) < TOL


class TestProjectors:
    def test_trace_counts_normal_directions(self):
        for family, expect in (("graph", 3.0), ("sphere", 1.0)):
            tf = tfr(family)
            Nt, _ = tractor_projectors(tf)
            np.testing.assert_allclose(jbase(mtrace(Nt), B), expect, atol=TOL)

    def test_canonical_tractor_is_tangential(self):
        tf = tfr("graph", "trig7")
        Nt, Pt = tractor_projectors(tf)
        assert mb(mvec(Nt, tf.X)) < TOL
        assert mb(msub(mvec(Pt, tf.X), tf.X)) < TOL

    def test_projector_h_symmetry(self):
        tf = tfr("graph", "trig7")
        Nt, _ = tractor_projectors(tf)
        assert mb(msub(tf.dagger(Nt), Nt)) < TOL

    def test_projector_annihilates_and_fixes_injected_normals(self):
        tf = tfr("graph", "trig7")
        fr = tf.fr
        Nt, Pt = tractor_projectors(tf)
        v = mvec(
            fr.ff.normal, np.array([fr.x[a] for a in range(7)], dtype=object)
        )
        U = tf.inject(v)
        assert mb(mvec(Pt, U)) < TOL
        assert mb(msub(mvec(Nt, U), U)) < TOL

    def test_idempotency_at_500_nodes(self):
        tf = tfr("graph", "trig7", order=3, count=500)
        Nt, Pt = tractor_projectors(tf)
        assert mb(msub(mdot(Nt, Nt), Nt), 500) < 1e-10
        assert mb(msub(mdot(Pt, Pt), Pt), 500) < 1e-10
        assert mb(mdot(Nt, Pt), 500) < 1e-10


class TestSecondFundamentalForm:
    def test_sphere_is_tractor_umbilic(self):
        tf = tfr("sphere", order=5)
        for j in range(4):
            assert mb(tractor_sff_direct(tf)[j]) < TOL
            assert mb(tractor_sff_split(tf)[j]) < TOL

    def test_torus_slot_content(self):
        tf = tfr("torus")
        fr = tf.fr
        L = tractor_sff_split(tf)
        seen = 0.0
        for j in range(4):
            for k in range(4):
                got = mvec(L[j], tf.Ztil[k])
                want = tf.inject([fr.ex.IIo[j, k, a] for a in range(8)])
                assert mb(msub(got, want)) < TOL
                seen = max(seen, mb(got))
        assert seen > 0.05
        DH = fr.D(np.array(list(fr.ex.H), dtype=object), "n")
        for j in range(4):
            got = mvec(L[j], tf.Ytil)
            want = tf.inject([jneg(DH[j, a]) for a in range(8)])
            assert mb(msub(got, want)) < TOL
            assert mb(mvec(L[j], tf.X)) < TOL

    @pytest.mark.parametrize("family,scale", ROUTE_CASES)
    def test_route_equality(self, family, scale):
        tf = tfr(family, scale)
        for j in range(4):
            resid = msub(tractor_sff_direct(tf)[j], tractor_sff_split(tf)[j])
            assert mb(resid) < TOL

    def test_structural_projections(self):
        tf = tfr("graph", "trig7")
        Nt, Pt = tractor_projectors(tf)
        for Lj in tractor_sff_direct(tf):
            assert mb(msub(mdot(Nt, Lj), Lj)) < TOL
            assert mb(mdot(Lj, Nt)) < TOL
            assert mb(mdot(Pt, Lj)) < TOL
            assert mb(msub(mdot(Lj, Pt), Lj)) < TOL


class TestCheckedDerivative:
    def test_normal_projector_is_parallel(self):
        tf = tfr("graph", "trig7")
        assert mb(checked_derivative(tf, tf.Ntr, "TC")) < TOL

    def test_derivative_of_projector_is_minus_both_sff(self):
        tf = tfr("graph", "trig7")
        DN = tractor_connection(tf, tf.Ntr, "TC")
        L = tractor_sff_direct(tf)
        for j in range(4):
            resid = madd(DN[j], madd(L[j], tf.dagger(L[j])))
            assert mb(resid) < TOL

    def test_agrees_with_full_connection_on_sphere(self):
        tf = tfr("sphere", order=5)
        U = varying_field(tf)
        full = tractor_connection(tf, U, "T")
        check = checked_derivative(tf, U, "T")
        assert mb(msub(full, check)) < TOL

    def test_preserves_pairing_of_tangential_tractors(self):
        tf = tfr("graph", "trig7")
        U = mvec(tf.Pitr, varying_field(tf))
        V = mvec(tf.Pitr, varying_field(tf, shift=3))
        DU = checked_derivative(tf, U, "T")
        DV = checked_derivative(tf, V, "T")
        for j in range(4):
            resid = jsub(
                jdiff(tf.pair(U, V), j),
                jadd(tf.pair(DU[j], V), tf.pair(U, DV[j])),
            )
            assert float(np.max(np.abs(jbase(resid, B)))) < TOL

    def test_sandwich_route_matches_matrix_route(self):
        tf = tfr("graph", "trig7")
        U = varying_field(tf, shift=1)
        want = checked_derivative(tf, U, "T")
        got = checked_sandwich(tf, U)
        assert mb(msub(got, want)) < TOL

    def test_reduces_to_normal_connection_on_injected_fields(self):
        tf = tfr("graph", "trig7")
        fr = tf.fr
        v = mvec(
            fr.ff.normal, np.array([fr.x[a] for a in range(7)], dtype=object)
        )
        Dv = fr.D(v, "n")
        DU = checked_derivative(tf, tf.inject(v), "T")
        for j in range(4):
            assert mb(msub(DU[j], tf.inject(Dv[j]))) < TOL

    def test_checked_derivatives_of_slot_generators(self):
        tf = tfr("graph", "trig7")
        fr = tf.fr
        g, ginv = fr.ff.g, fr.ff.ginv
        _, _, Pc = fialkow(tf)
        DX = checked_derivative(tf, tf.X, "T")
        for i in range(4):
            assert mb(msub(DX[i], tf.Ztil[i])) < TOL
        Zarr = omat(4, tf.dim)
        for k in range(4):
            for p in range(tf.dim):
                Zarr[k, p] = tf.Ztil[k][p]
        DZ = checked_derivative(tf, Zarr, "lT")
        for i in range(4):
            for j in range(4):
                want = omat(tf.dim)
                for p in range(tf.dim):
                    want[p] = jneg(
                        jadd(
                            jmul(g[i, j], tf.Ytil[p]),
                            jmul(Pc[i, j], tf.X[p]),
                        )
                    )
                assert mb(msub(DZ[i, j], want)) < TOL
        DY = checked_derivative(tf, tf.Ytil, "T")
        for i in range(4):
            want = omat(tf.dim)
            for p in range(tf.dim):
                want[p] = jsum(
                    jmul(jmul(Pc[i, k], ginv[k, l]), tf.Ztil[l][p])
                    for k in range(4)
                    for l in range(4)
                )
            assert mb(msub(DY[i], want)) < TOL


class TestFialkow:
    def test_sphere_comparison_vanishes(self):
        tf = tfr("sphere", order=5)
        F, f, Pc = fialkow(tf)
        assert mb(F) < TOL
        assert float(np.max(np.abs(jbase(f, B)))) < TOL
        assert mb(fialkow_closed(tf)) < TOL
        r = 1.3
        for j in range(4):
            for k in range(4):
                resid = jsub(
                    Pc[j, k], jmul(1.0 / (2 * r * r), tf.fr.ff.g[j, k])
                )
                assert float(np.max(np.abs(jbase(resid, B)))) < TOL

    @pytest.mark.parametrize("family,scale", [("torus", None), ("graph", "trig7")])
    def test_closed_form_matches_schouten_route(self, family, scale):
        tf = tfr(family, scale)
        F, f, _ = fialkow(tf)
        assert mb(msub(F, fialkow_closed(tf))) < TOL
        ginv = tf.fr.ff.ginv
        trace = jsum(
            jmul(ginv[j, k], fialkow_closed(tf)[j, k])
            for j in range(4)
            for k in range(4)
        )
        assert float(np.max(np.abs(jbase(jsub(f, trace), B)))) < TOL

    def test_torus_comparison_is_nonzero(self):
        tf = tfr("torus")
        F, _, _ = fialkow(tf)
        assert mb(F) > 0.01


class TestStructureEquations:
    def test_sphere_residuals(self):
        res = structure_residuals(tfr("sphere", order=5))
        for name in ("codazzi", "gauss", "ricci"):
            assert res[name] < TOL, name

    @pytest.mark.parametrize("scale", [None, "cos7", "trig7"])
    def test_graph_torus_residuals(self, scale):
        res = structure_residuals(tfr("graph", scale, order=5))
        for name in ("codazzi", "gauss", "ricci"):
            assert res[name] < 1e-8, name

    def test_rejects_low_order(self):
        with pytest.raises(ValueError, match="order"):
            structure_residuals(tfr("graph", None, order=3))


def contorsion_matrices(tf):
    """S_j: the endomorphism moving the Fialkow comparison between the
    bottom-row and first-column slots; h-antisymmetric by construction."""
    fr, n, dim = tf.fr, tf.n, tf.dim
    F, _, _ = fialkow(tf)
    ginv, pi = fr.ff.ginv, fr.ff.pi
    out = omat(4, dim, dim)
    out[:] = None
    for j in range(4):
        for a in range(n):
            val = jsum(
                jmul(jmul(F[j, l], ginv[l, k]), pi[a, k])
                for l in range(4)
                for k in range(4)
            )
            out[j, dim - 1, 1 + a] = jmul(tf.E, val)
            out[j, 1 + a, 0] = jneg(val)
    return out


def intrinsic_tractor_curvature(tf, i, j):
    """The curvature endomorphism of the intrinsic-metric tractor analog,
    assembled from the intrinsic Cotton and Weyl tensors in ambient slots."""
    fr, n, dim = tf.fr, tf.n, tf.dim
    ginv, pi = fr.ff.ginv, fr.ff.pi
    weyl = fr.curv.weyl
    Dp = fr.D(fr.curv.p, "ll")
    M = omat(dim, dim)
    M[:] = None
    for p in range(dim):
        M[p, 0] = jsum(
            jmul(
                jmul(jsub(Dp[i, j, l], Dp[j, i, l]), ginv[l, k]),
                tf.Ztil[k][p],
            )
            for k in range(4)
            for l in range(4)
        )
    for a in range(n):
        up = [
            jmul(tf.E, jsum(jmul(ginv[l, q], pi[a, q]) for q in range(4)))
            for l in range(4)
        ]
        for p in range(dim):
            M[p, 1 + a] = jsum(
                jmul(
                    jmul(
                        jsum(
                            jmul(ginv[k, m], weyl[i, j, m, l])
                            for m in range(4)
                        ),
                        tf.Ztil[k][p],
                    ),
                    up[l],
                )
                for k in range(4)
                for l in range(4)
            )
        M[dim - 1, 1 + a] = jadd(
            M[dim - 1, 1 + a],
            jneg(
                jsum(
                    jmul(jsub(Dp[i, j, l], Dp[j, i, l]), up[l])
                    for l in range(4)
                )
            ),
        )
    return M


class TestContorsion:
    def test_h_antisymmetry(self):
        tf = tfr("graph", "trig7", order=5, count=2)
        S = contorsion_matrices(tf)
        for j in range(4):
            assert mb(madd(tf.dagger(S[j]), S[j]), 2) < TOL

    def test_curvature_reconstruction(self):
        tf = tfr("graph", "trig7", order=5, count=2)
        dim = tf.dim
        S = contorsion_matrices(tf)
        DS = checked_derivative(tf, S, "lTC")
        worst = 0.0
        for i in range(4):
            for j in range(i):
                dS = msub(
                    np.asarray(DS[i, j], dtype=object),
                    np.asarray(DS[j, i], dtype=object),
                )
                br = msub(mdot(S[i], S[j]), mdot(S[j], S[i]))
                pred = msub(
                    msub(intrinsic_tractor_curvature(tf, i, j), dS), br
                )
                for col in range(dim):
                    U = tf.Pitr[:, col]
                    comm = connection_commutator(tf, U, "checked")
                    want = mvec(pred, U)
                    resid = np.array(
                        [jsub(comm[i, j, p], want[p]) for p in range(dim)],
                        dtype=object,
                    )
                    worst = max(worst, mb(resid, 2))
        assert worst < 1e-8


class TestScaleTransformation:
    @pytest.mark.parametrize("pair", [(None, "trig7"), ("lin7", "trig7")])
    def test_pairing_is_invariant(self, pair):
        tf1, tf2 = tfr("graph", pair[0]), tfr("graph", pair[1])
        T = ttrans_matrix(tf1, tf2)
        U, V = constant_field(tf1), constant_field(tf1)
        resid = jsub(
            tf2.pair(mvec(T, U), mvec(T, V)), tf1.pair(U, V)
        )
        assert float(np.max(np.abs(jbase(resid, B)))) < TOL

    @pytest.mark.parametrize("pair", [(None, "trig7"), ("lin7", "trig7")])
    def test_weight_zero_operators_conjugate(self, pair):
        tf1, tf2 = tfr("graph", pair[0]), tfr("graph", pair[1])
        T = ttrans_matrix(tf1, tf2)
        assert mb(msub(mdot(tf2.Ntr, T), mdot(T, tf1.Ntr))) < TOL
        L1 = tractor_sff_direct(tf1)
        L2 = tractor_sff_direct(tf2)
        for j in range(4):
            assert mb(msub(mdot(L2[j], T), mdot(T, L1[j]))) < TOL

    def test_intertwines_the_connections(self):
        tf1, tf2 = tfr("graph", "lin7"), tfr("graph", "trig7")
        T = ttrans_matrix(tf1, tf2)
        dim = tf1.dim
        for j in range(4):
            dT = omat(dim, dim)
            for p in range(dim):
                for q in range(dim):
                    dT[p, q] = jdiff(T[p, q], j)
            resid = madd(
                dT, msub(mdot(tf2.omega[j], T), mdot(T, tf1.omega[j]))
            )
            assert mb(resid) < TOL


class TestMixedField:
    def test_rejects_rank_mismatch(self):
        with pytest.raises(ValueError, match="valence"):
            MixedField("TC", omat(4))

    def test_rejects_wrong_tractor_axis_length(self):
        tf = tfr("graph")
        bad = omat(4)
        bad[:] = None
        with pytest.raises(ValueError, match="tractor axis"):
            tractor_connection(tf, bad, "T")

    def test_requires_kinds_for_plain_arrays(self):
        tf = tfr("graph")
        with pytest.raises(ValueError, match="kinds"):
            tractor_connection(tf, tf.X)

    def test_wrapped_fields_round_trip(self):
        tf = tfr("graph")
        field = MixedField("T", tf.X)
        out = tractor_connection(tf, field)
        assert isinstance(out, MixedField)
        assert out.valence == "lT"
        assert out.comp.shape == (4, tf.dim)
