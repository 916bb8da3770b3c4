"""Tests for moment/SOS relaxation assembly."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fjpop.fjkkt import PopProblem, Variant, build_fj, build_kkt
from fjpop.polycore import Polynomial, monomial_basis, parse_polynomial
from fjpop.relax import (
    augment_problem,
    block_matrix,
    build_denominator_sdp,
    build_moment_sdp,
    build_sos_sdp,
    eta,
    linform_value,
    localizing_structure,
    moment_structure,
    moment_vector,
)

from deskproblems import DESK_PROBLEMS, BALL, CUSP

F = Fraction


def poly(text, names):
    return parse_polynomial(text, names)


class TestMomentStructure:
    def test_univariate_order_one(self):
        assert moment_structure(1, 1) == {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 2}

    def test_bivariate_order_one(self):
        # basis(2,1) = [1, x2, x1]; y over basis(2,2) = [1, x2, x1, x2^2, x1x2, x1^2]
        m = moment_structure(2, 1)
        assert len(m) == 9
        assert m[(0, 0)] == 0
        assert m[(1, 1)] == 3
        assert m[(1, 2)] == m[(2, 1)] == 4
        assert m[(2, 2)] == 5

    def test_point_mass_rank_one(self):
        structure = moment_structure(1, 1)
        y = moment_vector([2.0], monomial_basis(1, 2))
        mat = np.array([[y[structure[(i, j)]] for j in range(2)] for i in range(2)])
        assert mat == pytest.approx(np.array([[1.0, 2.0], [2.0, 4.0]]))
        assert np.linalg.matrix_rank(mat) == 1
        assert min(np.linalg.eigvalsh(mat)) >= -1e-12

    def test_preconditions(self):
        with pytest.raises(ValueError):
            moment_structure(0, 1)
        with pytest.raises(ValueError):
            moment_structure(1, -1)


class TestLocalizingStructure:
    def test_constant_one_reduces_to_moment(self):
        names = ("x",)
        loc = localizing_structure(Polynomial.constant(names, 1), 1, 1)
        mom = moment_structure(1, 1)
        assert {ij: form for ij, form in loc.items()} == {
            ij: {idx: F(1)} for ij, idx in mom.items()
        }

    def test_order_zero_interval(self):
        names = ("x",)
        loc = localizing_structure(poly("1 - x^2", names), 1, 0)
        assert loc == {(0, 0): {0: F(1), 2: F(-1)}}

    def test_point_mass_identity(self):
        names = ("x",)
        p = poly("1 - x^2", names)
        u = 0.5
        y_basis = monomial_basis(1, 4)
        y = moment_vector([u], y_basis)
        loc = localizing_structure(p, 1, 1, y_basis)
        mat = np.array(
            [[linform_value(loc[(i, j)], y) for j in range(2)] for i in range(2)]
        )
        v = np.array([1.0, u])
        assert mat == pytest.approx(p.evaluate_float([u]) * np.outer(v, v))


class TestAugmentProblem:
    def test_cusp_fj_products(self):
        aug = augment_problem(CUSP.pop, Variant.FJ, use_products=True)
        assert aug.var_names == ("x", "lam0", "lam1")
        assert aug.g == (poly("x^3", aug.var_names),)
        assert aug.h == build_fj(CUSP.pop).polynomials
        assert aug.theta == Polynomial.variable(aug.var_names, 1)

    def test_products_count(self):
        names = ("x",)
        pop = PopProblem(
            f=poly("x", names), g=(poly("x", names), poly("1 - x", names))
        )
        aug = augment_problem(pop, use_products=True)
        assert len(aug.g) == 3
        assert aug.var_names == names

    def test_kkt_variant(self):
        aug = augment_problem(BALL.pop, "kkt")
        assert aug.var_names == ("x1", "x2", "lam1")
        assert len(aug.h) == 3  # n + m
        assert aug.theta is None

    def test_variant_none_keeps_everything(self):
        aug = augment_problem(BALL.pop)
        assert aug == BALL.pop

    def test_equalities_block_augmentation(self):
        names = ("x",)
        pop = PopProblem(f=poly("x", names), h=(poly("x", names),))
        with pytest.raises(ValueError):
            augment_problem(pop, Variant.FJ)

    def test_existing_theta_is_lifted(self):
        names = ("x",)
        pop = PopProblem(
            f=poly("x^2", names), g=(poly("x", names),), theta=poly("x", names)
        )
        aug = augment_problem(pop, Variant.FJ)
        assert aug.theta == poly("x", aug.var_names)


class TestBuildMomentSdp:
    def test_interval_hand_assembly(self):
        names = ("x",)
        pop = PopProblem(f=poly("x", names), g=(poly("1 - x^2", names),))
        sdp = build_moment_sdp(pop, 1)
        assert len(sdp.y_basis) == 3
        m1, loc = sdp.blocks
        assert m1.size == 2 and m1.kind == "psd"
        assert m1.entries == {(0, 0): {0: F(1)}, (0, 1): {1: F(1)}, (1, 1): {2: F(1)}}
        assert loc.size == 1
        assert loc.entries == {(0, 0): {0: F(1), 2: F(-1)}}
        assert sdp.objective == {1: F(1)}
        assert sdp.normalization == {0: F(1)}
        assert sdp.zero_rows == ()

    def test_equality_row(self):
        names = ("x",)
        pop = PopProblem(
            f=poly("x", names), g=(poly("1 - x^2", names),), h=(poly("x", names),)
        )
        sdp = build_moment_sdp(pop, 1)
        assert sdp.zero_rows == ({1: F(1)},)

    def test_order_too_small_reports_minimum(self):
        names = ("x",)
        pop = PopProblem(f=poly("x^4", names))
        with pytest.raises(ValueError, match="minimum admissible order is 2"):
            build_moment_sdp(pop, 1)

    def test_meta(self):
        sdp = build_moment_sdp(BALL.pop, 2)
        assert sdp.meta["k"] == 2
        assert sdp.meta["k_min"] == 1
        assert sdp.meta["y_size"] == len(monomial_basis(2, 4))
        assert sdp.meta["block_sizes"] == [6, 3]

    def test_duplicate_y_entries_shared(self):
        # entries (0,2) of M_1 and (1,1) read the same y_{x^2}: shared index
        names = ("x", "y")
        pop = PopProblem(f=poly("x", names))
        sdp = build_moment_sdp(pop, 1)
        m1 = sdp.blocks[0]
        idx_x2 = sdp.y_basis.index_of(poly("x^2", names).sorted_terms()[0][0])
        assert m1.entries[(2, 2)] == {idx_x2: F(1)}


class TestBuildSosSdp:
    def test_equation_count_univariate(self):
        names = ("x",)
        pop = PopProblem(f=poly("x^2", names))
        prog = build_sos_sdp(pop, 2)
        assert len(prog.equations) == 5  # degrees 0..4

    def test_square_objective_assignment(self):
        names = ("x",)
        pop = PopProblem(f=poly("x^2", names))
        prog = build_sos_sdp(pop, 1)
        assignment = {
            ("xi",): F(0),
            ("G", 0, 0, 0): F(0),
            ("G", 0, 0, 1): F(0),
            ("G", 0, 1, 1): F(1),
        }
        for eq in prog.equations:
            total = sum(c * assignment.get(key, F(0)) for key, c in eq.lhs.items())
            assert total == eq.rhs

    def test_hand_certificate_interval(self):
        # 1 + x = 1/2 (1+x)^2 + 1/2 (1-x^2): feasible at xi = 0
        names = ("x",)
        pop = PopProblem(f=poly("1 + x", names), g=(poly("1 - x^2", names),))
        prog = build_sos_sdp(pop, 1)
        assert [len(b.basis) for b in prog.gram_blocks] == [2, 1]
        assignment = {
            ("xi",): F(0),
            ("G", 0, 0, 0): F(1, 2),
            ("G", 0, 0, 1): F(1, 2),
            ("G", 0, 1, 1): F(1, 2),
            ("G", 1, 0, 0): F(1, 2),
        }
        for eq in prog.equations:
            total = sum(c * assignment.get(key, F(0)) for key, c in eq.lhs.items())
            assert total == eq.rhs

    def test_multiplier_bases(self):
        aug = augment_problem(CUSP.pop, Variant.FJ, use_products=True)
        prog = build_sos_sdp(aug, 2)
        # h rows have degrees 3, 4, 2 -> r_t = 2, 2, 1 -> bases v_0, v_0, v_2
        assert prog.meta["multiplier_sizes"] == [1, 1, len(monomial_basis(3, 2))]

    def test_order_error_matches_moment_side(self):
        names = ("x",)
        pop = PopProblem(f=poly("x^4", names))
        with pytest.raises(ValueError, match="minimum admissible order is 2"):
            build_sos_sdp(pop, 1)


class TestEtaAndDenominator:
    def test_eta_values(self):
        names = ("x",)
        f2 = poly("x^2", names)
        theta = poly("x", names)
        assert eta(3, f2, theta) == 4
        assert eta(1, f2, theta) == 0

    def test_eta_errors(self):
        names = ("x",)
        f = poly("x^2", names)
        with pytest.raises(ValueError):
            eta(2, f, None)
        with pytest.raises(ValueError):
            eta(2, f, Polynomial.constant(names, 3))
        with pytest.raises(ValueError):
            eta(0, f, poly("x", names))

    @given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 3))
    @settings(max_examples=40)
    def test_degree_contract(self, deg_f, deg_t, extra):
        names = ("x",)
        f = poly(f"x^{deg_f}", names)
        theta = poly(f"x^{deg_t} + 1", names)
        k = -(-deg_f // 2) + extra
        e = eta(k, f, theta)
        assert e % 2 == 0
        assert e * deg_t + deg_f <= 2 * k

    def test_denominator_assembly(self):
        names = ("x",)
        pop = PopProblem(f=poly("x^2", names), theta=poly("x", names))
        moment, sos = build_denominator_sdp(pop, 2)
        assert moment.meta["eta"] == 2
        assert moment.objective == {4: F(1)}  # L_y(x^2 * x^2)
        assert moment.normalization == {2: F(1)}  # L_y(x^2) = 1
        assert sos.xi_weight == poly("x^2", names)
        assert sos.target == poly("x^4", names)

    def test_denominator_requires_theta(self):
        with pytest.raises(ValueError):
            build_denominator_sdp(BALL.pop, 2)

    def test_denominator_on_augmented_ball(self):
        aug = augment_problem(BALL.pop, Variant.FJ, use_products=True)
        moment, sos = build_denominator_sdp(aug, 2)
        # eta = 2 floor((4-1)/2) = 2, theta = lam0
        assert moment.meta["eta"] == 2
        lam0_sq = Polynomial.variable(aug.var_names, 2) ** 2
        idx = moment.y_basis.index_of(lam0_sq.sorted_terms()[0][0])
        assert moment.normalization == {idx: F(1)}


class TestPointMassSoundness:
    @pytest.mark.parametrize("problem", DESK_PROBLEMS, ids=lambda p: p.name)
    def test_feasible_points_satisfy_blocks(self, problem):
        pop = problem.pop
        sdp = build_moment_sdp(pop, 2)
        for point in problem.points:
            for gj in pop.g:
                assert gj.evaluate(point) >= 0
            for ht in pop.h:
                assert ht.evaluate(point) == 0
            y = moment_vector([float(v) for v in point], sdp.y_basis)
            for block in sdp.blocks:
                eigs = np.linalg.eigvalsh(block_matrix(block, y))
                assert eigs.min() >= -1e-10
            for row in sdp.zero_rows:
                assert abs(linform_value(row, y)) <= 1e-10
            assert linform_value(sdp.normalization, y) == pytest.approx(1.0, abs=1e-12)
            value = linform_value(sdp.objective, y)
            assert abs(value - pop.f.evaluate_float([float(v) for v in point])) <= 1e-12

    def test_augmented_cusp_point_mass(self):
        aug = augment_problem(CUSP.pop, Variant.FJ, use_products=True)
        sdp = build_moment_sdp(aug, 2)
        point = [0.0, 0.0, 1.0]  # x = 0 with multipliers (0, 1)
        y = moment_vector(point, sdp.y_basis)
        for block in sdp.blocks:
            assert np.linalg.eigvalsh(block_matrix(block, y)).min() >= -1e-10
        for row in sdp.zero_rows:
            assert abs(linform_value(row, y)) <= 1e-10
        assert linform_value(sdp.objective, y) == pytest.approx(0.0, abs=1e-12)

    def test_augmented_ball_point_mass(self):
        aug = augment_problem(BALL.pop, Variant.FJ, use_products=True)
        sdp = build_moment_sdp(aug, 2)
        s = math.sqrt(5.0)
        point = [-1.0, 0.0, 2.0 / s, 1.0 / s]  # KKT point with lam1/lam0 = 1/2
        y = moment_vector(point, sdp.y_basis)
        for block in sdp.blocks:
            assert np.linalg.eigvalsh(block_matrix(block, y)).min() >= -1e-9
        for row in sdp.zero_rows:
            assert abs(linform_value(row, y)) <= 1e-10
        assert linform_value(sdp.objective, y) == pytest.approx(-1.0, abs=1e-12)


class TestDualSoundness:
    def test_hand_certificate_bounds_from_below(self):
        names = ("x",)
        pop = PopProblem(f=poly("1 + x", names), g=(poly("1 - x^2", names),))
        prog = build_sos_sdp(pop, 1)
        grams = [
            np.array([[0.5, 0.5], [0.5, 0.5]]),
            np.array([[0.5]]),
        ]
        xi = 0.0
        rng = np.random.default_rng(7)
        for u in rng.uniform(-1.0, 1.0, size=20):
            total = xi
            for gram_block, mat in zip(prog.gram_blocks, grams):
                v = np.array(
                    [
                        Polynomial(names, {mono: 1}).evaluate_float([u])
                        for mono in gram_block.basis
                    ]
                )
                total += gram_block.generator.evaluate_float([u]) * float(v @ mat @ v)
            # the identity reproduces f(u), and every term is >= 0 on S(g)
            assert total == pytest.approx(pop.f.evaluate_float([u]), abs=1e-12)
            assert pop.f.evaluate_float([u]) >= xi - 1e-12
