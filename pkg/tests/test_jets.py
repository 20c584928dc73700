"""Tests for the truncated Taylor-jet arithmetic.

Oracles used here are independent of the jet engine: closed-form hand
derivatives, central finite differences, sympy symbolic differentiation,
and the Leibniz convolution formula written out with explicit loops.
"""

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from willmore4 import _kernels
from willmore4.jets import (
    MAX_ORDER,
    Jet,
    JetSpace,
    jet_apply,
    jet_const,
    jet_partial,
    jet_variable,
    n_coeffs,
)


def rand_jet(rng, order, width=1, base_interval=None):
    """Random jet with standard-normal coefficients; the base value may be
    constrained to an interval (for functions with restricted domains)."""
    a = Jet.zero(order, width)
    a.c[:] = rng.standard_normal(a.c.shape)
    if base_interval is not None:
        lo, hi = base_interval
        a.c[0] = lo + (hi - lo) * rng.random(width)
    return a


class TestLayout:
    def test_coefficient_counts(self):
        assert [n_coeffs(k) for k in range(7)] == [1, 5, 15, 35, 70, 126, 210]
        for k in range(MAX_ORDER + 1):
            sp_k = JetSpace.get(k)
            assert sp_k.exps.shape == (n_coeffs(k), 4)

    def test_graded_lex_prefix(self):
        # the order-k table is a strict prefix of the order-6 table, which
        # is what makes truncation a zero-copy view
        full = JetSpace.get(6).exps
        for k in range(6):
            part = JetSpace.get(k).exps
            assert np.array_equal(full[: part.shape[0]], part)

    def test_truncation_is_a_view(self):
        a = jet_variable(0, 1.0, 5, width=3)
        t = a.truncate(2)
        assert t.order == 2
        assert t.c.shape == (15, 3)
        assert np.shares_memory(t.c, a.c)
        with pytest.raises(ValueError):
            a.truncate(6)

    def test_mixed_order_arithmetic_truncates(self):
        a = jet_variable(0, 0.7, 5)
        b = jet_variable(1, -0.2, 2)
        assert (a * b).order == 2
        assert (a + b).order == 2
        assert (a - b).order == 2


class TestSeeds:
    def test_variable_seed(self):
        a = jet_variable(0, 2.0, 3)
        assert a.base == pytest.approx(2.0)
        assert jet_partial(a, (1, 0, 0, 0)) == pytest.approx(1.0)
        # every other coefficient vanishes
        nz = np.nonzero(a.c[:, 0])[0]
        assert set(nz.tolist()) <= {0, a.space.index_of[(1, 0, 0, 0)]}

    def test_variable_seed_zero_base(self):
        a = jet_variable(3, 0.0, 2)
        assert np.count_nonzero(a.c) == 1
        assert jet_partial(a, (0, 0, 0, 1)) == pytest.approx(1.0)

    def test_const(self):
        c = jet_const(3.5, 4, width=2)
        assert np.count_nonzero(c.c[1:]) == 0
        assert c.base == pytest.approx([3.5, 3.5])

    def test_batched_base(self):
        a = jet_variable(0, [1.0, 2.0, 3.0], 2, width=3)
        assert a.base == pytest.approx([1.0, 2.0, 3.0])


class TestElementaryFunctions:
    def test_exp_quintic_coefficient(self):
        # Taylor coefficient of t^5/5! and the corresponding derivative
        e = jet_apply("exp", jet_variable(0, 0.0, 5))
        idx = e.space.index_of[(5, 0, 0, 0)]
        assert e.c[idx, 0] == pytest.approx(1.0 / 120.0, rel=1e-14)
        assert jet_partial(e, (5, 0, 0, 0)) == pytest.approx(1.0, rel=1e-14)

    def test_exp_partials_all_equal_base_value(self):
        x0 = 0.37
        e = jet_apply("exp", jet_variable(1, x0, 6))
        for k in range(7):
            got = jet_partial(e, (0, k, 0, 0))
            assert got == pytest.approx(math.exp(x0), rel=1e-13), f"order {k}"

    def test_sin_of_product_mixed_partials(self):
        # f(u, v) = sin(u v): hand-computed mixed partials as the oracle
        u0, v0 = 0.3, -0.4
        u = jet_variable(0, u0, 4)
        v = jet_variable(1, v0, 4)
        f = jet_apply("sin", u * v)
        s, c = math.sin(u0 * v0), math.cos(u0 * v0)
        # d/du dv f = cos(uv) - uv sin(uv)
        assert jet_partial(f, (1, 1, 0, 0)) == pytest.approx(
            c - u0 * v0 * s, rel=1e-12
        )
        # d2/du2 dv f = -2 v sin(uv) - u v^2 cos(uv)
        assert jet_partial(f, (2, 1, 0, 0)) == pytest.approx(
            -2.0 * v0 * s - u0 * v0**2 * c, rel=1e-12
        )

    def test_sin_of_product_at_origin(self):
        # sin(uv) = uv - (uv)^3/6 + ...: the (1,1) coefficient is exactly 1
        u = jet_variable(0, 0.0, 6)
        v = jet_variable(1, 0.0, 6)
        f = jet_apply("sin", u * v)
        assert jet_partial(f, (1, 1, 0, 0)) == pytest.approx(1.0, abs=1e-15)
        assert jet_partial(f, (2, 2, 0, 0)) == pytest.approx(0.0, abs=1e-15)
        # -(uv)^3/6 contributes -3!3!/6 = -6 to the (3,3) mixed partial
        assert jet_partial(f, (3, 3, 0, 0)) == pytest.approx(-6.0)

    def test_sin_linear_combination(self):
        # f = sin(u + 2v): d/du dv f = -2 sin(u + 2v)
        u = jet_variable(0, math.pi / 2, 3)
        v = jet_variable(1, 0.0, 3)
        f = jet_apply("sin", u + 2.0 * v)
        assert jet_partial(f, (1, 1, 0, 0)) == pytest.approx(-2.0, rel=1e-13)

    def test_central_difference_oracle(self):
        # compare a handful of jet partials of f = exp(sin(u) + u w) against
        # second-order central differences of the plain float evaluation
        def f(u, w):
            return math.exp(math.sin(u) + u * w)

        u0, w0 = 0.41, -0.23
        h = 1e-5
        d_u = (f(u0 + h, w0) - f(u0 - h, w0)) / (2 * h)
        d_uw = (
            f(u0 + h, w0 + h) - f(u0 + h, w0 - h)
            - f(u0 - h, w0 + h) + f(u0 - h, w0 - h)
        ) / (4 * h * h)

        u = jet_variable(0, u0, 3)
        w = jet_variable(2, w0, 3)
        g = jet_apply("exp", jet_apply("sin", u) + u * w)
        assert jet_partial(g, (1, 0, 0, 0)) == pytest.approx(d_u, rel=1e-8)
        assert jet_partial(g, (1, 0, 1, 0)) == pytest.approx(d_uw, rel=1e-6)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_inverse_pairs(self, seed):
        rng = np.random.default_rng(seed)
        a = rand_jet(rng, 5, width=4, base_interval=(0.5, 2.0))
        for lhs, rhs in [
            (jet_apply("log", jet_apply("exp", a)), a),
            (jet_apply("exp", jet_apply("log", a)), a),
            (jet_apply("recip", jet_apply("recip", a)), a),
            (jet_apply("sqrt", a) * jet_apply("sqrt", a), a),
        ]:
            np.testing.assert_allclose(lhs.c, rhs.c, rtol=1e-11, atol=1e-11)

    def test_pythagorean_identity(self):
        rng = np.random.default_rng(7)
        a = rand_jet(rng, 6, width=3)
        one = jet_apply("sin", a) ** 2 + jet_apply("cos", a) ** 2
        expect = np.zeros_like(one.c)
        expect[0] = 1.0
        np.testing.assert_allclose(one.c, expect, atol=1e-12)

    def test_integer_and_fractional_powers(self):
        rng = np.random.default_rng(3)
        a = rand_jet(rng, 4, width=2, base_interval=(0.7, 1.5))
        np.testing.assert_allclose((a**3).c, (a * a * a).c, rtol=1e-13)
        assert np.count_nonzero((a**0).c[1:]) == 0
        np.testing.assert_allclose(
            (a**-2).c, (jet_apply("recip", a) ** 2).c, rtol=1e-12
        )
        via_log = jet_apply("exp", 1.5 * jet_apply("log", a))
        np.testing.assert_allclose(
            jet_apply("pow", a, 1.5).c, via_log.c, rtol=1e-11, atol=1e-12
        )


class TestPolynomialExactness:
    def test_sparse_degree_six_polynomial_vs_sympy(self):
        rng = np.random.default_rng(2024)
        syms = sp.symbols("t0 t1 t2 t3")
        space6 = JetSpace.get(6)
        picks = rng.choice(space6.nc, size=25, replace=False)
        coeffs = rng.integers(-5, 6, size=25)
        base = [0.3, -0.7, 1.1, 0.2]

        expr = sp.Integer(0)
        jets4 = [jet_variable(i, base[i], 6) for i in range(4)]
        poly_jet = Jet.zero(6, 1)
        for k, cf in zip(picks, coeffs):
            e = space6.exps[k]
            expr += int(cf) * math.prod(s**int(p) for s, p in zip(syms, e))
            term = jet_const(float(cf), 6)
            for i in range(4):
                for _ in range(int(e[i])):
                    term = term * jets4[i]
            poly_jet = poly_jet + term

        subs = dict(zip(syms, base))
        for idx in range(space6.nc):
            alpha = space6.exps[idx]
            want = expr
            for s, p in zip(syms, alpha):
                want = sp.diff(want, s, int(p))
            want = float(want.subs(subs))
            got = float(jet_partial(poly_jet, alpha)[0])
            assert got == pytest.approx(want, rel=1e-9, abs=1e-9), (
                f"partial {tuple(alpha)}: jet {got} vs sympy {want}"
            )

    def test_leibniz_convolution(self):
        # product coefficients must equal the explicit double-loop convolution
        rng = np.random.default_rng(11)
        a = rand_jet(rng, 4, width=2)
        b = rand_jet(rng, 4, width=2)
        prod = a * b
        space = a.space
        for k in range(space.nc):
            gamma = space.exps[k]
            acc = np.zeros(2)
            for i in range(space.nc):
                beta = space.exps[i]
                rem = gamma - beta
                if np.all(rem >= 0):
                    acc += a.c[i] * b.c[space.index_of[tuple(rem)]]
            np.testing.assert_allclose(prod.c[k], acc, rtol=1e-12, atol=1e-14)


class TestCalculusRules:
    @settings(max_examples=200, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_product_rule(self, seed):
        rng = np.random.default_rng(seed)
        a = rand_jet(rng, 4, width=5)
        b = rand_jet(rng, 4, width=5)
        i = int(rng.integers(4))
        lhs = (a * b).diff(i)
        rhs = a.diff(i) * b.truncate(3) + a.truncate(3) * b.diff(i)
        np.testing.assert_allclose(lhs.c, rhs.c, rtol=1e-10, atol=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_chain_rule_exp(self, seed):
        rng = np.random.default_rng(seed)
        a = rand_jet(rng, 4, width=5, base_interval=(-1.0, 1.0))
        i = int(rng.integers(4))
        lhs = jet_apply("exp", a).diff(i)
        rhs = jet_apply("exp", a.truncate(3)) * a.diff(i)
        np.testing.assert_allclose(lhs.c, rhs.c, rtol=1e-9, atol=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_quotient_rule(self, seed):
        rng = np.random.default_rng(seed)
        a = rand_jet(rng, 4, width=5)
        b = rand_jet(rng, 4, width=5, base_interval=(0.8, 1.8))
        i = int(rng.integers(4))
        lhs = (a / b).diff(i)
        b3 = b.truncate(3)
        rhs = (a.diff(i) * b3 - a.truncate(3) * b.diff(i)) / (b3 * b3)
        np.testing.assert_allclose(lhs.c, rhs.c, rtol=1e-8, atol=1e-9)

    def test_diff_then_partial_matches_partial(self):
        rng = np.random.default_rng(5)
        a = rand_jet(rng, 5, width=3)
        for alpha in [(1, 0, 2, 0), (0, 1, 1, 1), (2, 0, 0, 0)]:
            i = next(j for j in range(4) if alpha[j] > 0)
            beta = list(alpha)
            beta[i] -= 1
            np.testing.assert_allclose(
                jet_partial(a, alpha),
                jet_partial(a.diff(i), tuple(beta)),
                rtol=1e-13,
            )

    def test_diff_of_constant_direction_vanishes(self):
        a = jet_variable(0, 1.2, 3)
        f = jet_apply("exp", a)
        assert np.count_nonzero(f.diff(2).c) == 0


class TestBatchingAndBackends:
    def test_batched_columns_match_singletons(self):
        rng = np.random.default_rng(9)
        wide_a = rand_jet(rng, 4, width=7)
        wide_b = rand_jet(rng, 4, width=7)
        wide = jet_apply("exp", wide_a.truncate(3)) * (wide_a * wide_b).truncate(3)
        for col in range(7):
            na = Jet(wide_a.space, wide_a.c[:, col : col + 1].copy())
            nb = Jet(wide_b.space, wide_b.c[:, col : col + 1].copy())
            narrow = jet_apply("exp", na.truncate(3)) * (na * nb).truncate(3)
            np.testing.assert_allclose(
                wide.c[:, col], narrow.c[:, 0], rtol=1e-14, atol=1e-15
            )

    def test_numpy_fallback_agrees_with_active_backend(self):
        rng = np.random.default_rng(17)
        space = JetSpace.get(6)
        a = rng.standard_normal((space.nc, 3))
        b = rng.standard_normal((space.nc, 3))
        out_active = np.zeros_like(a)
        out_numpy = np.zeros_like(a)
        _kernels.mul_acc(a, b, space.mul_ia, space.mul_ib, space.mul_seg, out_active)
        _kernels._mul_acc_numpy(
            a, b, space.mul_ia, space.mul_ib, space.mul_seg, out_numpy
        )
        np.testing.assert_allclose(out_active, out_numpy, rtol=1e-13, atol=1e-14)

    def test_ifma_accumulates(self):
        rng = np.random.default_rng(21)
        a = rand_jet(rng, 3, width=2)
        b = rand_jet(rng, 3, width=2)
        acc = Jet.zero(3, 2)
        acc.ifma(a, b)
        acc.ifma(a, b)
        np.testing.assert_allclose(acc.c, 2.0 * (a * b).c, rtol=1e-13)


class TestErrors:
    def test_domain_violations_name_the_function(self):
        bad = jet_variable(0, -1.0, 2)
        with pytest.raises(ValueError, match="log"):
            jet_apply("log", bad)
        with pytest.raises(ValueError, match="sqrt"):
            jet_apply("sqrt", bad)
        with pytest.raises(ValueError, match="recip"):
            jet_apply("recip", jet_variable(0, 0.0, 2))

    def test_unknown_tag(self):
        with pytest.raises(ValueError, match="unknown"):
            jet_apply("tanh", jet_variable(0, 0.0, 2))

    def test_pow_requires_exponent(self):
        with pytest.raises(ValueError, match="pow"):
            jet_apply("pow", jet_variable(0, 1.0, 2))

    def test_axis_out_of_range(self):
        with pytest.raises(ValueError, match="axis"):
            jet_variable(4, 0.0, 2)

    def test_order_out_of_range(self):
        with pytest.raises(ValueError, match="order"):
            jet_variable(0, 0.0, MAX_ORDER + 1)

    def test_partial_beyond_order(self):
        a = jet_variable(0, 0.0, 2)
        with pytest.raises(ValueError, match="order"):
            jet_partial(a, (3, 0, 0, 0))

    def test_diff_order_zero(self):
        with pytest.raises(ValueError, match="order"):
            jet_const(1.0, 0).diff(0)
