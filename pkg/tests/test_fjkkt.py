"""Tests for augmented systems, products, critical sets, classification."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fjpop.fjkkt import (
    AugmentedSystem,
    PopProblem,
    Variant,
    build_fj,
    build_fj_plus,
    build_kkt,
    build_kkt_plus,
    build_system,
    classify_point,
    in_critical_set,
    in_critical_set_plus,
    phi_matrix,
    products,
    rank_plus,
)
from fjpop.polycore import Polynomial, parse_polynomial

from conftest import nonzero_polynomials


def poly(text, names):
    return parse_polynomial(text, names)


@st.composite
def pop_problems(draw):
    n = draw(st.integers(1, 3))
    names = tuple(f"x{i + 1}" for i in range(n))
    f = draw(nonzero_polynomials(names, max_degree=3))
    m = draw(st.integers(0, 3))
    g = tuple(draw(nonzero_polynomials(names, max_degree=3)) for _ in range(m))
    return PopProblem(f=f, g=g)


class TestPopProblem:
    def test_fields_and_d(self):
        names = ("x1", "x2")
        pop = PopProblem(f=poly("x1^4 + x2", names), g=(poly("1 - x1^2", names),))
        assert pop.n == 2 and pop.m == 1 and pop.d == 4

    def test_ambient_mismatch_rejected(self):
        f = poly("x1", ("x1",))
        g = poly("y1", ("y1",))
        with pytest.raises(ValueError):
            PopProblem(f=f, g=(g,))

    def test_d_requires_some_nonzero_data(self):
        names = ("x1",)
        pop = PopProblem(f=Polynomial.zero(names))
        with pytest.raises(ValueError):
            pop.d


class TestBuildSystems:
    def test_fj_cubic_example(self):
        names = ("x",)
        pop = PopProblem(f=poly("x", names), g=(poly("x^3", names),))
        sys = build_fj(pop)
        aug = ("x", "lam0", "lam1")
        assert sys.variant is Variant.FJ
        assert sys.multiplier_count == 2
        assert sys.polynomials == (
            poly("lam0 - 3 * lam1 * x^2", aug),
            poly("lam1 * x^3", aug),
            poly("1 - lam0^2 - lam1^2", aug),
        )

    def test_fj_plus_cubic_example(self):
        names = ("x",)
        pop = PopProblem(f=poly("x", names), g=(poly("x^3", names),))
        sys = build_fj_plus(pop)
        aug = ("x", "lam0", "lam1")
        assert sys.polynomials == (
            poly("lam0^2 - 3 * lam1^2 * x^2", aug),
            poly("lam1^2 * x^3", aug),
            poly("1 - lam0^2 - lam1^2", aug),
        )

    def test_fj_ball_example(self):
        names = ("x1", "x2")
        pop = PopProblem(
            f=poly("x1", names), g=(poly("1 - x1^2 - x2^2", names),)
        )
        sys = build_fj(pop)
        aug = ("x1", "x2", "lam0", "lam1")
        assert sys.polynomials == (
            poly("lam0 + 2 * lam1 * x1", aug),
            poly("2 * lam1 * x2", aug),
            poly("lam1 - lam1 * x1^2 - lam1 * x2^2", aug),
            poly("1 - lam0^2 - lam1^2", aug),
        )

    def test_kkt_ball_example(self):
        names = ("x1", "x2")
        pop = PopProblem(
            f=poly("x1", names), g=(poly("1 - x1^2 - x2^2", names),)
        )
        sys = build_kkt(pop)
        aug = ("x1", "x2", "lam1")
        assert sys.multiplier_count == 1
        assert sys.polynomials == (
            poly("1 + 2 * lam1 * x1", aug),
            poly("2 * lam1 * x2", aug),
            poly("lam1 - lam1 * x1^2 - lam1 * x2^2", aug),
        )

    def test_kkt_plus_squares_multipliers(self):
        names = ("x",)
        pop = PopProblem(f=poly("x", names), g=(poly("x^3", names),))
        sys = build_kkt_plus(pop)
        aug = ("x", "lam1")
        assert sys.polynomials == (
            poly("1 - 3 * lam1^2 * x^2", aug),
            poly("lam1^2 * x^3", aug),
        )

    def test_unconstrained_fj(self):
        names = ("x",)
        pop = PopProblem(f=poly("x^2", names))
        sys = build_fj(pop)
        aug = ("x", "lam0")
        assert sys.polynomials == (
            poly("2 * lam0 * x", aug),
            poly("1 - lam0^2", aug),
        )

    def test_unconstrained_kkt(self):
        names = ("x",)
        pop = PopProblem(f=poly("x^2", names))
        sys = build_kkt(pop)
        assert sys.multiplier_count == 0
        assert sys.polynomials == (poly("2 * x", ("x",)),)

    def test_build_system_dispatch(self):
        names = ("x",)
        pop = PopProblem(f=poly("x", names), g=(poly("x^3", names),))
        for variant, builder in [
            (Variant.FJ, build_fj),
            (Variant.FJ_PLUS, build_fj_plus),
            (Variant.KKT, build_kkt),
            (Variant.KKT_PLUS, build_kkt_plus),
        ]:
            assert build_system(pop, variant) == builder(pop)

    @given(pop_problems())
    @settings(max_examples=50)
    def test_structural_counts_and_degrees(self, pop):
        assume(any(p.degree >= 1 for p in (pop.f, *pop.g)))
        d = pop.d
        n, m = pop.n, pop.m
        fj = build_fj(pop)
        assert len(fj.polynomials) == n + m + 1
        assert fj.multiplier_count == m + 1
        assert all(p.degree <= d + 1 for p in fj.polynomials)
        fjp = build_fj_plus(pop)
        assert len(fjp.polynomials) == n + m + 1
        assert all(p.degree <= d + 2 for p in fjp.polynomials)
        # the normalization row is shared between both forms
        assert fjp.polynomials[-1] == fj.polynomials[-1]
        kkt = build_kkt(pop)
        assert len(kkt.polynomials) == n + m
        assert kkt.multiplier_count == m
        assert all(p.degree <= d + 1 for p in kkt.polynomials)
        kktp = build_kkt_plus(pop)
        assert len(kktp.polynomials) == n + m
        assert all(p.degree <= d + 2 for p in kktp.polynomials)

    def test_multiplier_names_follow_base_variables(self):
        names = ("x1", "x2")
        pop = PopProblem(
            f=poly("x1", names),
            g=(poly("1 - x1^2", names), poly("x2", names)),
        )
        assert build_fj(pop).var_names == ("x1", "x2", "lam0", "lam1", "lam2")
        assert build_kkt(pop).var_names == ("x1", "x2", "lam1", "lam2")


class TestProducts:
    def test_two_constraints_order(self):
        names = ("x1", "x2")
        g1 = poly("1 - x1^2", names)
        g2 = poly("x2", names)
        assert products((g1, g2)) == (g1, g2, g1 * g2)

    def test_three_constraints_count_and_binary_order(self):
        names = ("x",)
        g = tuple(poly(t, names) for t in ("x", "1 - x", "2 - x"))
        prods = products(g)
        assert len(prods) == 7
        assert prods[0] == g[0]
        assert prods[2] == g[0] * g[1]
        assert prods[4] == g[0] * g[2]
        assert prods[6] == g[0] * g[1] * g[2]

    def test_empty_input(self):
        assert products(()) == ()

    def test_cap_enforced(self):
        names = ("x",)
        g = tuple(poly(f"x + {j}", names) for j in range(13))
        with pytest.raises(ValueError):
            products(g)

    @given(st.lists(st.fractions(-2, 2, max_denominator=4), min_size=2, max_size=2))
    @settings(max_examples=30)
    def test_nonnegative_on_feasible_points(self, point):
        names = ("x1", "x2")
        g = (poly("4 - x1^2 - x2^2", names), poly("x1 + 2", names))
        vals = [gj.evaluate(point) for gj in g]
        assume(all(v >= 0 for v in vals))
        for prod in products(g):
            assert prod.evaluate(point) >= 0


class TestCriticalSets:
    def test_phi_matrix_ball(self):
        names = ("x1", "x2")
        g = (poly("1 - x1^2 - x2^2", names),)
        phi = phi_matrix(g, [-1.0, 0.0])
        assert phi.shape == (3, 1)
        assert phi[:, 0] == pytest.approx([2.0, 0.0, 0.0])

    def test_phi_matrix_dimension_mismatch(self):
        names = ("x1", "x2")
        with pytest.raises(ValueError):
            phi_matrix((poly("x1", names),), [0.0])

    def test_cusp_is_critical(self):
        names = ("x",)
        g = (poly("x^3", names),)
        assert in_critical_set(g, [0.0])
        assert in_critical_set_plus(g, [0.0])

    def test_regular_point_not_critical(self):
        names = ("x",)
        g = (poly("1 - x^2", names),)
        assert not in_critical_set(g, [0.0])
        assert not in_critical_set_plus(g, [0.0])
        assert not in_critical_set(g, [1.0])
        assert not in_critical_set_plus(g, [1.0])

    def test_plus_set_is_smaller(self):
        # parallel gradients pointing the same way: rank drops but rank+ does not
        names = ("x1", "x2")
        g = (poly("x1", names), poly("2 * x1", names))
        x = [0.0, 0.0]
        assert in_critical_set(g, x)
        assert not in_critical_set_plus(g, x)

    def test_opposed_gradients_critical_for_both(self):
        names = ("x1", "x2")
        g = (poly("x1", names), poly("-1 * x1", names))
        x = [0.0, 0.0]
        assert in_critical_set(g, x)
        assert in_critical_set_plus(g, x)

    def test_rank_plus_values(self):
        assert rank_plus(np.array([[1.0, -1.0], [0.0, 0.0]])) == 1
        assert rank_plus(np.array([[1.0, 2.0], [0.0, 0.0]])) == 2
        assert rank_plus(np.array([[1.0, 0.0], [0.0, 1.0]])) == 2
        assert rank_plus(np.zeros((2, 1))) == 0
        assert rank_plus(np.zeros((2, 0))) == 0

    def test_rank_plus_cap(self):
        with pytest.raises(ValueError):
            rank_plus(np.ones((2, 13)))

    @given(st.integers(1, 7))
    @settings(max_examples=20)
    def test_scaling_invariance(self, c):
        names = ("x1", "x2")
        g = (poly("1 - x1^2 - x2^2", names), poly("x2", names))
        scaled = tuple(Fraction(c) * gj for gj in g)
        for x in ([0.0, 0.0], [1.0, 0.0], [0.6, 0.8]):
            assert in_critical_set(g, x) == in_critical_set(scaled, x)
            assert in_critical_set_plus(g, x) == in_critical_set_plus(scaled, x)

    def test_tolerance_must_be_positive(self):
        names = ("x",)
        with pytest.raises(ValueError):
            in_critical_set((poly("x", names),), [0.0], tol=0.0)


class TestClassifyPoint:
    def test_cusp_point_is_fj_not_kkt(self):
        names = ("x",)
        pop = PopProblem(f=poly("x", names), g=(poly("x^3", names),))
        res = classify_point(pop, [0.0])
        assert res.fj_holds and not res.kkt_holds and res.in_W
        assert res.multipliers == pytest.approx((0.0, 1.0), abs=1e-9)
        assert res.kkt_multipliers is None
        assert res.residual <= 1e-9

    def test_ball_boundary_is_kkt(self):
        names = ("x1", "x2")
        pop = PopProblem(
            f=poly("x1", names), g=(poly("1 - x1^2 - x2^2", names),)
        )
        res = classify_point(pop, [-1.0, 0.0])
        assert res.kkt_holds and res.fj_holds and not res.in_W
        assert res.kkt_multipliers == pytest.approx((0.5,), abs=1e-9)
        lam0, lam1 = res.multipliers
        assert lam1 / lam0 == pytest.approx(0.5, abs=1e-9)
        assert np.hypot(lam0, lam1) == pytest.approx(1.0, abs=1e-12)

    def test_interior_minimum_kkt_with_zero_multiplier(self):
        names = ("x",)
        pop = PopProblem(f=poly("x^2", names), g=(poly("1 - x^2", names),))
        res = classify_point(pop, [0.0])
        assert res.kkt_holds and res.fj_holds and not res.in_W
        assert res.kkt_multipliers == pytest.approx((0.0,), abs=1e-12)
        assert res.multipliers == pytest.approx((1.0, 0.0), abs=1e-12)

    def test_infeasible_point_rejected(self):
        names = ("x",)
        pop = PopProblem(f=poly("x", names), g=(poly("x^3", names),))
        with pytest.raises(ValueError, match="infeasible"):
            classify_point(pop, [-1.0])

    def test_equalities_not_supported(self):
        names = ("x",)
        pop = PopProblem(f=poly("x", names), h=(poly("x", names),))
        with pytest.raises(ValueError):
            classify_point(pop, [0.0])

    def test_unconstrained_stationary_point(self):
        names = ("x",)
        pop = PopProblem(f=poly("x^2", names))
        res = classify_point(pop, [0.0])
        assert res.fj_holds and res.kkt_holds
        assert res.multipliers == pytest.approx((1.0,), abs=1e-12)

    def test_unconstrained_nonstationary_point(self):
        names = ("x",)
        pop = PopProblem(f=poly("x", names))
        res = classify_point(pop, [0.0])
        assert not res.fj_holds and not res.kkt_holds and not res.in_W

    @given(pop_problems(), st.lists(st.integers(-1, 1), min_size=3, max_size=3))
    @settings(max_examples=40)
    def test_kkt_implies_fj(self, pop, raw_point):
        x = [float(v) for v in raw_point[: pop.n]]
        try:
            res = classify_point(pop, x)
        except ValueError:
            return  # infeasible draw
        if res.kkt_holds:
            assert res.fj_holds
            assert not res.in_W

    @given(pop_problems(), st.lists(st.integers(-1, 1), min_size=3, max_size=3))
    @settings(max_examples=40)
    def test_fj_system_vanishes_at_classified_points(self, pop, raw_point):
        tol = 1e-7
        x = [float(v) for v in raw_point[: pop.n]]
        try:
            res = classify_point(pop, x, tol=tol)
        except ValueError:
            return  # infeasible draw
        if not res.fj_holds:
            return
        sys = build_fj(pop)
        point = x + list(res.multipliers)
        for entry in sys.polynomials:
            assert abs(entry.evaluate_float(point)) <= 10 * tol
