"""Linear algebra, quadrature, contour and random-stream primitives."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from polyaprod.numerics import (QuadratureConfig, QuadratureError, as_positive_spectrum, as_signed_spectrum,
                                contour_origin, gauss_panels, haar_unitary, hermitian_eigenvalues,
                                integrate_line, jacobi_eigh, laurent_coefficients, log_rule, make_rng,
                                spawn_rngs, squared_singular_values, strip_zeros, vandermonde)


def random_hermitian(n, rng):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (z + z.conj().T) / 2


# --- eigenvalues -------------------------------------------------------------

def test_eigenvalues_of_diagonal_are_sorted():
    np.testing.assert_allclose(hermitian_eigenvalues(np.diag([3.0, -1.0])), [-1.0, 3.0])


def test_eigenvalues_of_pauli_x():
    np.testing.assert_allclose(hermitian_eigenvalues(np.array([[0.0, 1.0], [1.0, 0.0]])), [-1.0, 1.0], atol=1e-15)


def test_eigenvalue_sum_equals_trace():
    x = random_hermitian(5, make_rng(1))
    ev = hermitian_eigenvalues(x)
    tr = np.trace(x).real
    assert abs(ev.sum() - tr) <= 1e-10 * max(1.0, abs(tr))


def test_jacobi_eigh_agrees_with_lapack():
    x = random_hermitian(6, make_rng(2))
    ev_j = np.sort(jacobi_eigh(x)[0])
    np.testing.assert_allclose(ev_j, hermitian_eigenvalues(x), atol=1e-12)


def test_eigenvalues_reject_non_hermitian():
    with pytest.raises(ValueError):
        hermitian_eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_strip_zeros_drops_numerical_zeros():
    np.testing.assert_allclose(strip_zeros(np.array([-2.0, 1e-17, 3.0])), [-2.0, 3.0])


# --- squared singular values -------------------------------------------------

def test_squared_singular_values_of_diagonal():
    np.testing.assert_allclose(squared_singular_values(np.diag([2.0, 3.0])), [4.0, 9.0])


def test_squared_singular_values_of_column():
    np.testing.assert_allclose(squared_singular_values(np.array([[1.0], [1.0]])), [2.0])


def test_squared_singular_values_match_gram_eigenvalues():
    rng = make_rng(3)
    g = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    gram = strip_zeros(hermitian_eigenvalues(g @ g.conj().T))
    np.testing.assert_allclose(np.sort(squared_singular_values(g)), np.sort(gram), rtol=1e-10)


# --- Haar unitaries ----------------------------------------------------------

def test_haar_dim_one_is_a_phase():
    k = haar_unitary(1, make_rng(4))
    assert abs(abs(k[0, 0]) - 1.0) <= 1e-12


def test_haar_is_unitary():
    k = haar_unitary(3, make_rng(5))
    assert np.max(np.abs(k @ k.conj().T - np.eye(3))) <= 1e-12


def test_haar_first_entry_moment():
    # |k11|^2 is uniform on [0, 1] for dim 2: mean 1/2, variance 1/12
    k = haar_unitary(2, make_rng(6), size=100_000)
    u = np.abs(k[:, 0, 0]) ** 2
    stderr = math.sqrt(1 / 12 / len(u))
    assert abs(u.mean() - 0.5) <= 3 * stderr


def test_haar_phases_are_uniform():
    # without the phase correction the diagonal of QR output is biased
    k = haar_unitary(2, make_rng(7), size=50_000)
    mean_phase = np.mean(k[:, 0, 0] / np.abs(k[:, 0, 0]))
    assert abs(mean_phase) <= 3 / math.sqrt(50_000)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_rng_streams_are_reproducible(seed):
    a = make_rng(seed).standard_normal(4)
    b = make_rng(seed).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    c1, c2 = spawn_rngs(seed, 2)
    assert not np.array_equal(c1.standard_normal(4), c2.standard_normal(4))


# --- quadrature --------------------------------------------------------------

def test_integrate_exponential():
    assert abs(integrate_line(lambda a: math.exp(-a), "half-line").value - 1.0) <= 1e-10


def test_integrate_gamma_two():
    assert abs(integrate_line(lambda a: a * math.exp(-a), "half-line").value - 1.0) <= 1e-10


def test_integrate_beta_function():
    val = integrate_line(lambda a: math.sqrt(a) * (1 - a) ** 2, (0.0, 1.0)).value
    assert abs(val - special.beta(1.5, 3.0)) <= 1e-10
    assert abs(val - 16 / 105) <= 1e-10


def test_integrate_raises_on_divergence():
    cfg = QuadratureConfig(max_subdivisions=5)
    with pytest.raises(QuadratureError):
        integrate_line(lambda a: 1.0 / a, (0.0, 1.0), cfg)


def test_quadrature_config_validates():
    with pytest.raises(ValueError):
        QuadratureConfig(abs_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureConfig(contour_points=7)


def test_gauss_panels_integrate_polynomials_exactly():
    x, w = gauss_panels(np.linspace(0.0, 2.0, 4), 8)
    assert abs(np.sum(w * x**7) - 2.0**8 / 8) <= 1e-12


def test_log_rule_integrates_over_decades():
    a, w = log_rule(1e-12, 60.0)
    assert abs(np.sum(w * np.exp(-a)) - 1.0) <= 1e-10


# --- contours ----------------------------------------------------------------

def test_contour_residue_of_inverse():
    assert abs(contour_origin(lambda z: 1 / z) - 1.0) <= 1e-14


def test_contour_of_entire_function_vanishes():
    assert abs(contour_origin(lambda z: z)) <= 1e-14


def test_contour_extracts_elementary_symmetric_coefficient():
    # (z - 1)(z - 2)/z^2 = 1 - 3/z + 2/z^2, residue -(1 + 2)
    val = contour_origin(lambda z: (z - 1.0) * (z - 2.0) / z**2, radius=3.0)
    assert abs(val + 3.0) <= 1e-12


def test_laurent_coefficients_of_polynomial():
    c = laurent_coefficients(lambda z: 1 + 2 * z + 3 * z**2, range(4))
    np.testing.assert_allclose(c, [1, 2, 3, 0], atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=6), st.floats(min_value=0.3, max_value=5.0))
def test_contour_result_is_radius_independent(k, radius):
    # coefficient of z^-1 in e^z / z^(k+1) is 1/k!
    val = contour_origin(lambda z: np.exp(z), pole_order=k + 1, radius=radius)
    assert abs(val - 1 / math.factorial(k)) <= 1e-10


# --- Vandermonde -------------------------------------------------------------

def test_vandermonde_small_cases():
    assert vandermonde([1.0]) == 1.0
    assert vandermonde([1.0, 3.0]) == 2.0
    assert vandermonde([1.0, 2.0, 4.0]) == 6.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=-5, max_value=5), min_size=2, max_size=5, unique=True),
       st.permutations(range(5)))
def test_vandermonde_is_alternating(a, perm):
    a = np.array(a)
    p = [i for i in perm if i < len(a)]
    inversions = sum(1 for i in range(len(p)) for j in range(i + 1, len(p)) if p[i] > p[j])
    lhs = vandermonde(a[p])
    rhs = (-1) ** inversions * vandermonde(a)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


def test_vandermonde_matches_determinant():
    a = np.array([0.3, -1.2, 2.0, 0.7])
    det = np.linalg.det(np.vander(a, increasing=True))
    assert abs(vandermonde(a) - det) <= 1e-12 * abs(det)


def test_spectrum_validation():
    np.testing.assert_array_equal(as_signed_spectrum([2.0, -1.0]), [-1.0, 2.0])
    with pytest.raises(ValueError):
        as_signed_spectrum([0.0, 1.0])
    with pytest.raises(ValueError):
        as_positive_spectrum([-1.0, 1.0])
