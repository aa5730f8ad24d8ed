import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from georigid import jets as J
from exprgen import TOLS, check_against_fd, jet_of, random_point, random_tree


def x_jet(v, dim=1):
    return J.jet_coordinate(dim, 0, np.full(dim, v))


class TestConstructors:
    def test_coordinate_dim2(self):
        j = J.jet_coordinate(2, 0, (3, 5))
        assert j.value == 3
        np.testing.assert_array_equal(j.grad, [1, 0])
        assert not j.hess.any() and not j.third.any()

    def test_coordinate_dim4_last(self):
        j = J.jet_coordinate(4, 3, 0.0)
        assert j.value == 0
        np.testing.assert_array_equal(j.grad, np.eye(4)[3])

    def test_coordinate_product(self):
        p = J.jet_coordinate(2, 0, (2, 3)) * J.jet_coordinate(2, 1, (2, 3))
        assert p.value == 6
        np.testing.assert_array_equal(p.grad, [3, 2])
        np.testing.assert_array_equal(p.hess, [[0, 1], [1, 0]])

    def test_coordinate_index_out_of_range(self):
        with pytest.raises(IndexError):
            J.jet_coordinate(3, 3, (0, 0, 0))

    def test_vector_coordinates_match_scalar_ones(self):
        x = np.array([0.3, -1.0, 2.0])
        X = J.coordinates(x)
        for k in range(3):
            for a, b in zip(X[k].coeffs, J.jet_coordinate(3, k, x).coeffs):
                np.testing.assert_array_equal(a, b)


class TestCombine:
    def test_constant_product(self):
        p = J.jet_combine("mul", J.constant(2.0, 3), J.constant(3.0, 3))
        assert p.value == 6
        assert all(not c.any() for c in p.coeffs[1:])

    def test_x_over_x(self):
        x = x_jet(5.0)
        q = J.jet_combine("div", x, x)
        assert q.value == pytest.approx(1.0, abs=1e-15)
        assert all(np.abs(c).max() <= 1e-15 for c in q.coeffs[1:])

    def test_cube_third_derivative(self):
        x = x_jet(0.7)
        c = J.jet_combine("mul", x, x * x)
        assert c.third[0, 0, 0] == pytest.approx(6.0, abs=1e-14)
        assert c.hess[0, 0] == pytest.approx(6 * 0.7, abs=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(J.JetDimensionError):
            J.jet_combine("add", J.constant(1.0, 2), J.constant(1.0, 3))

    def test_division_by_near_zero_is_an_error(self):
        with pytest.raises(J.JetDomainError):
            J.jet_combine("div", J.constant(1.0, 2), J.constant(1e-15, 2))

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            J.jet_combine("pow", J.constant(1.0, 2), J.constant(1.0, 2))


class TestElementary:
    def test_exp_zero(self):
        e = J.jet_elementary("exp", J.constant(0.0, 2))
        assert e.value == 1 and not e.grad.any()

    def test_log_exp_roundtrip(self):
        x = J.jet_coordinate(3, 1, (0.1, 0.7, -0.2))
        r = J.jet_elementary("log", J.jet_elementary("exp", x))
        for a, b in zip(r.coeffs, x.coeffs):
            np.testing.assert_allclose(a, b, atol=1e-15)

    def test_sine_taylor_coefficients(self):
        s = J.jet_elementary("sin", x_jet(0.0))
        assert (s.value, s.grad[0], s.hess[0, 0], s.third[0, 0, 0]) == pytest.approx((0, 1, 0, -1), abs=1e-15)

    @pytest.mark.parametrize("fn, v", [("log", -1.0), ("sqrt", -0.5), ("log", 0.0)])
    def test_domain_errors_report_value(self, fn, v):
        with pytest.raises(J.JetDomainError) as exc:
            J.jet_elementary(fn, x_jet(v))
        assert exc.value.value == v

    def test_real_power_needs_positive_base(self):
        with pytest.raises(J.JetDomainError):
            J.jet_elementary("pow_const", x_jet(-2.0), 0.5)

    def test_integer_power_of_negative_base(self):
        p = J.jet_elementary("pow_const", x_jet(-2.0), 3)
        assert (p.value, p.grad[0], p.hess[0, 0], p.third[0, 0, 0]) == pytest.approx((-8, 12, -12, 6))

    def test_atan_derivative(self):
        a = J.jet_elementary("atan", x_jet(1.0))
        assert a.grad[0] == pytest.approx(0.5)
        assert a.hess[0, 0] == pytest.approx(-0.5)

    def test_pow_needs_exponent(self):
        with pytest.raises(ValueError):
            J.jet_elementary("pow_const", x_jet(1.0))


class TestMatrixOps:
    def test_inverse_jet_times_matrix_is_identity(self, rng):
        x = rng.normal(size=3)
        X = J.coordinates(x)
        M = J.matrix([[2.0 + X[0] * X[0], X[1]], [X[1], 3.0 + J.sin(X[2])]])
        P = J.matmul(J.inv(M), M)
        np.testing.assert_allclose(P.value, np.eye(2), atol=1e-14)
        for c in P.coeffs[1:]:
            assert np.abs(c).max() <= 1e-13

    def test_logabsdet_gradient_is_trace(self, rng):
        x = rng.normal(size=2)
        X = J.coordinates(x)
        M = J.matrix([[1.5 + X[0], X[1]], [X[1], 2.0 - X[0] * X[1]]])
        ld = J.logabsdet(M)
        Minv = np.linalg.inv(M.value)
        dM = np.moveaxis(M.coeffs[1], 0, -1)
        np.testing.assert_allclose(ld.grad, np.einsum("ij,jik->k", Minv, dM), atol=1e-14)

    def test_taylor_eval_reproduces_cubic(self, rng):
        x = rng.normal(size=2)
        X = J.coordinates(x)
        f = X[0] * X[0] * X[1] - 2.0 * X[1] + 0.5
        h = rng.normal(size=2) * 0.3
        y = x + h
        assert J.taylor_eval(f, h) == pytest.approx(y[0] ** 2 * y[1] - 2 * y[1] + 0.5, abs=1e-13)


def _cubic(n, rng):
    c = rng.normal()
    b = rng.normal(size=n)
    A = rng.normal(size=(n, n))
    A = A + A.T
    T = rng.normal(size=(n, n, n))
    T = sum(np.transpose(T, p) for p in itertools.permutations(range(3))) / 6
    return c, b, A, T


@settings(max_examples=60)
@given(st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_cubic_polynomials_are_exact(n, seed):
    """Leibniz products of coordinate jets reproduce every derivative of a cubic exactly."""
    rng = np.random.default_rng(seed)
    c, b, A, T = _cubic(n, rng)
    x = rng.uniform(-2, 2, n)
    X = [J.jet_coordinate(n, k, x) for k in range(n)]
    f = J.constant(c, n)
    for i in range(n):
        f = f + b[i] * X[i]
        for j in range(n):
            f = f + (A[i, j] / 2) * (X[i] * X[j])
            for k in range(n):
                f = f + (T[i, j, k] / 6) * (X[i] * X[j] * X[k])
    grad = b + A @ x + np.einsum("ijk,j,k->i", T, x, x) / 2
    hess = A + np.einsum("ijk,k->ij", T, x)
    scale = 1 + np.abs(c) + np.abs(b).sum() + np.abs(A).sum() * 4 + np.abs(T).sum() * 8
    for got, want in zip(f.coeffs[1:], (grad, hess, T)):
        assert np.abs(got - want).max() <= 1e-12 * scale


@settings(max_examples=60)
@given(st.integers(0, 2 ** 32 - 1))
def test_derivative_tensors_are_symmetric(seed):
    rng = np.random.default_rng(seed)
    e = random_tree(rng, 5)
    j = jet_of(e, random_point(rng))
    if not isinstance(j, J.Jet):
        return
    for perm in itertools.permutations(range(3)):
        np.testing.assert_allclose(j.third, np.transpose(j.third, perm), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(j.hess, j.hess.T, rtol=1e-12, atol=1e-12)


@settings(max_examples=150)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6))
def test_random_trees_match_finite_differences(seed, depth):
    rng = np.random.default_rng(seed)
    e = random_tree(rng, depth)
    x = random_point(rng)
    j = jet_of(e, x)
    if not isinstance(j, J.Jet):
        j = J.constant(j, 3)
    errs, _ = check_against_fd(j, e, x)
    assert all(er <= tol for er, tol in zip(errs, TOLS)), errs


def test_oracle_detects_a_wrong_third_derivative(rng):
    """An error planted in the third derivative must be caught by the finite-difference check."""
    from georigid.dsl import parse_expr
    e = parse_expr("sin(x*y) + exp(z)/(2 + cos(x))")
    x = random_point(rng)
    j = jet_of(e, x)
    bad = J.Jet(j.coeffs[:3] + (j.coeffs[3] * 1.05 + 0.05,), j.dim)
    assert all(er <= tol for er, tol in zip(check_against_fd(j, e, x)[0], TOLS))
    assert check_against_fd(bad, e, x)[0][2] > TOLS[2]
