import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_jacobi, eval_legendre

from cr3d.errors import InvalidParameter
from cr3d.polylib import (
    UnivariatePoly,
    beta_coeffs,
    endpoint_system_det,
    gauss_legendre,
    gegenbauer,
    iota_k,
    jacobi,
    legendre,
    q_dk,
    q_dk_gegenbauer,
    q_k,
)

X = np.linspace(-1, 1, 17)


@pytest.mark.parametrize("n", range(0, 9))
def test_legendre_matches_scipy(n):
    assert np.allclose(legendre(n)(X), eval_legendre(n, X), atol=1e-13)


@pytest.mark.parametrize("a,b,n", [(0, 3, 0), (0, 3, 1), (0, 3, 4), (0, 2, 5), (1, 1, 3), (2, 0, 6)])
def test_jacobi_matches_scipy(a, b, n):
    assert np.allclose(jacobi(a, b, n)(X), eval_jacobi(n, a, b, X), atol=1e-12)


def test_jacobi_exact_coefficients_are_fractions():
    p = jacobi(0, 3, 1)
    # P_1^(0,3)(x) = (5x - 3)/2, so P(1 - 2l) = 1 - 5l
    assert p.exact_value(Fraction(1)) == 1
    assert p.exact_value(Fraction(-1)) == -4
    assert np.allclose(p.compose_affine(1, -2).coeffs, [1.0, -5.0])


def test_q_k_small_cases():
    assert np.allclose(q_k(1).coeffs, [-0.5, 1.5])  # Q_1 = (3x - 1)/2
    for k in range(1, 8):
        assert q_k(k).exact_value(1) == 1
        d = (legendre(k + 1) - legendre(k)).deriv()
        assert q_k(k).allclose(UnivariatePoly.from_floats(d.coeffs / (k + 1)))


@pytest.mark.parametrize("k", [1, 3, 5, 7])
def test_q_k_odd_endpoint(k):
    assert q_k(k).exact_value(-1) == -(k + 1)


def test_q_1_gives_the_facet_function_one_minus_three_lambda():
    assert np.allclose(q_k(1).compose_affine(1, -2).coeffs, [1.0, -3.0])


@pytest.mark.parametrize("k", range(1, 7))
def test_q3k_coincides_with_q_k(k):
    assert np.abs(q_dk(3, k).coeffs - q_k(k).coeffs).max() <= 1e-12


@pytest.mark.parametrize("d,k", [(2, 1), (2, 3), (4, 2), (5, 3)])
def test_q_dk_gegenbauer_agrees(d, k):
    assert q_dk(d, k).allclose(q_dk_gegenbauer(d, k), atol=1e-10)


def test_gegenbauer_relation_to_legendre_second_derivative():
    # L_6'' = 3 C_4^(5/2)
    assert np.allclose(legendre(6).deriv(2)(X), 3 * gegenbauer(2.5, 4)(X), atol=1e-11)


def test_endpoint_determinant_exact():
    assert endpoint_system_det(3) == -50
    assert endpoint_system_det(5) == -196


@pytest.mark.parametrize("k", range(0, 13))
def test_iota_closed_form(k):
    assert abs(iota_k(k) - 4 * (-1) ** k / (k + 2)) <= 1e-11


@pytest.mark.parametrize("k,m", [(1, 0), (3, 1), (5, 2), (4, 3)])
def test_beta_paths_agree(k, m):
    a, b = beta_coeffs(k, m, "explicit").values, beta_coeffs(k, m, "solve").values
    assert np.allclose(a, b, rtol=1e-10, atol=0)


def test_invalid_parameters():
    with pytest.raises(InvalidParameter):
        jacobi(0, 3, -1)
    with pytest.raises(InvalidParameter):
        q_k(0)


def test_gauss_legendre_is_numpy_rule():
    x, w = gauss_legendre(5)
    assert math.isclose(w.sum(), 2.0)
    assert np.allclose(np.dot(w, x**8), 2 / 9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 8), st.integers(0, 8), st.floats(-3, 3), st.floats(-3, 3))
def test_compose_affine_property(n, m, a, b):
    p = jacobi(0, 3, n) + legendre(m)
    x = np.linspace(-1, 1, 5)
    lhs = p.compose_affine(a, b)(x)
    rhs = p(a + b * x)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * max(1.0, np.abs(rhs).max()))
