"""Identities of the polynomial basis, the increment transform, and derivatives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monoreg import (
    bernstein_row,
    build_basis_set,
    evaluate_derivative,
    evaluate_f,
    increment_transform,
)


class TestBernsteinRow:
    def test_boundary_zero(self):
        row = bernstein_row(0.0, 50)
        expected = np.zeros(51)
        expected[0] = 1.0
        np.testing.assert_array_equal(row, expected)

    def test_boundary_one(self):
        row = bernstein_row(1.0, 50)
        expected = np.zeros(51)
        expected[50] = 1.0
        np.testing.assert_array_equal(row, expected)

    def test_midpoint_order_two(self):
        np.testing.assert_allclose(bernstein_row(0.5, 2), [0.25, 0.5, 0.25], atol=1e-15)

    def test_partition_of_unity_high_order(self):
        assert abs(bernstein_row(0.3, 50).sum() - 1.0) < 1e-12

    def test_entries_in_unit_interval(self, rng):
        for x in rng.uniform(0, 1, 50):
            row = bernstein_row(float(x), 30)
            assert np.all(row >= 0) and np.all(row <= 1)

    @settings(max_examples=80, deadline=None)
    @given(
        x=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        order=st.integers(min_value=1, max_value=200),
    )
    def test_partition_of_unity_property(self, x, order):
        assert abs(bernstein_row(x, order).sum() - 1.0) < 1e-12

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            bernstein_row(-0.1, 10)
        with pytest.raises(ValueError):
            bernstein_row(1.1, 10)
        with pytest.raises(ValueError):
            bernstein_row(0.5, 0)


class TestIncrementTransform:
    @pytest.mark.parametrize("order", [1, 2, 10, 50, 100])
    def test_exact_inverse(self, order):
        t = increment_transform(order)
        product = t.a_matrix @ t.a_inverse
        np.testing.assert_array_equal(product, np.eye(order + 1, dtype=np.int64))

    def test_differences(self, rng):
        t = increment_transform(6)
        beta = rng.normal(size=7)
        theta = t.a_matrix @ beta
        assert theta[0] == pytest.approx(beta[0])
        np.testing.assert_allclose(theta[1:], np.diff(beta), atol=1e-15)


class TestBuildBasisSet:
    def test_lambda_endpoints(self):
        basis = build_basis_set([0.0, 1.0], 3)
        np.testing.assert_allclose(basis.lam[0], [1, 0, 0, 0], atol=1e-15)
        np.testing.assert_allclose(basis.lam[1], [1, 1, 1, 1], atol=1e-15)

    def test_lambda_column_zero_all_ones(self, rng):
        basis = build_basis_set(rng.uniform(0, 1, 200), 50)
        np.testing.assert_allclose(basis.lam[:, 0], 1.0, atol=1e-12)

    def test_psi_row_sums(self, rng):
        basis = build_basis_set(np.linspace(0, 1, 100), 50)
        np.testing.assert_allclose(basis.psi.sum(axis=1), 1.0, atol=1e-12)

    def test_dpsi_row_sums(self, rng):
        basis = build_basis_set(rng.uniform(0, 1, 60), 50)
        np.testing.assert_allclose(basis.dpsi.sum(axis=1), 50.0, atol=1e-10)

    def test_lambda_matches_materialized_inverse(self, rng):
        order = 17
        basis = build_basis_set(rng.uniform(0, 1, 40), order)
        t = increment_transform(order)
        np.testing.assert_allclose(
            basis.lam, basis.psi @ t.a_inverse.astype(float), atol=1e-13
        )

    def test_out_of_range_error(self):
        with pytest.raises(ValueError):
            build_basis_set([0.0, 1.5], 10)


class TestEvaluateF:
    def test_intercept_only(self, rng):
        basis = build_basis_set(rng.uniform(0, 1, 20), 8)
        theta = np.zeros(9)
        theta[0] = 2.5
        np.testing.assert_allclose(evaluate_f(basis, theta), 2.5, atol=1e-14)

    def test_constant_increments_give_scaled_line(self):
        # binomial mean identity: equal increments w on every slot give
        # a line of slope order * w
        order, w = 50, 0.2
        x = np.linspace(0, 1, 31)
        basis = build_basis_set(x, order)
        theta = np.full(order + 1, w)
        theta[0] = 0.0
        np.testing.assert_allclose(evaluate_f(basis, theta), order * w * x, atol=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10_000))
    def test_monotone_under_nonnegative_increments(self, seed):
        rng = np.random.default_rng(seed)
        order = 12
        basis = build_basis_set(np.sort(rng.uniform(0, 1, 25)), order)
        theta = np.concatenate([[rng.normal()], rng.uniform(0, 1, order)])
        values = evaluate_f(basis, theta)
        assert np.all(np.diff(values) >= -1e-12)

    def test_dimension_mismatch(self):
        basis = build_basis_set([0.5], 4)
        with pytest.raises(ValueError):
            evaluate_f(basis, np.zeros(4))


class TestEvaluateDerivative:
    def test_constant_increments(self):
        order, w = 20, 0.3
        basis = build_basis_set(np.linspace(0, 1, 11), order)
        theta = np.full(order + 1, w)
        theta[0] = 5.0
        np.testing.assert_allclose(evaluate_derivative(basis, theta), order * w, atol=1e-10)

    def test_intercept_only_is_zero(self):
        basis = build_basis_set(np.linspace(0, 1, 11), 6)
        theta = np.zeros(7)
        theta[0] = 3.0
        np.testing.assert_array_equal(evaluate_derivative(basis, theta), 0.0)

    def test_integral_identity(self, rng):
        # integral of the derivative over [0, 1] equals the sum of increments;
        # Simpson on 10001 points resolves the order-50 curvature well inside
        # the tolerance (composite trapezoid would sit right at its edge)
        from scipy.integrate import simpson

        order = 50
        grid = np.linspace(0, 1, 10_001)
        basis = build_basis_set(grid, order)
        for _ in range(10):
            theta = np.concatenate([[rng.normal()], rng.uniform(0, 0.5, order)])
            quad = simpson(evaluate_derivative(basis, theta), x=grid)
            assert abs(quad - theta[1:].sum()) < 1e-6

    def test_finite_difference_agreement(self, rng):
        order = 50
        interior = np.linspace(0.05, 0.95, 41)
        h = 1e-6
        b_mid = build_basis_set(interior, order)
        b_hi = build_basis_set(interior + h, order)
        b_lo = build_basis_set(interior - h, order)
        for _ in range(10):
            theta = np.concatenate([[rng.normal()], rng.uniform(0, 0.5, order)])
            fd = (evaluate_f(b_hi, theta) - evaluate_f(b_lo, theta)) / (2 * h)
            exact = evaluate_derivative(b_mid, theta)
            np.testing.assert_allclose(fd, exact, rtol=1e-4)

    def test_dimension_mismatch(self):
        basis = build_basis_set([0.5], 4)
        with pytest.raises(ValueError):
            evaluate_derivative(basis, np.zeros(6))
