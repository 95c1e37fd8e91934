"""Pólya weights, Pólya and polynomial ensembles, and their spherical transforms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from polyaprod.ensembles import (PolynomialEnsembleG, PolynomialEnsembleH, eigen_measure_constant, make_weight,
                                 polya_derivative, polya_frequency_check, polya_jpdf, sample_ensemble_matrix,
                                 sample_polya_matrix, spherical_transform_polya, spherical_transform_polynomial)
from polyaprod.montecarlo import compare_density, mc_expectation_spherical
from polyaprod.numerics import log_rule, make_rng, vandermonde
from polyaprod.spherical import psi, spherical_transform_phi, standard_frequency
from polyaprod.validation import catalog_weights, non_polya_weight

GINIBRE = make_weight("ginibre", nu=0)


def batch_sv2(g):
    return np.linalg.svd(g, compute_uv=False) ** 2


def orthant_mass(density, n, hi=60.0):
    x, w = log_rule(1e-12, hi, order=16)
    if n == 1:
        return float(np.sum(w * density(x[:, None])))
    pts = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    return float(np.outer(w, w).ravel() @ density(pts))


# --- weights -----------------------------------------------------------------

def test_ginibre_mellin_at_two():
    assert abs(GINIBRE.mellin(2.0) - 1.0) <= 1e-14


def test_jacobi_mellin_closed_form():
    w = make_weight("jacobi", nu=0, mu=1, n=2)
    assert abs(w.mellin(1.0) - 1 / 3) <= 1e-14
    assert abs(w.mellin_quadrature(1.0) - 1 / 3) <= 1e-9


def test_projection_mellin_is_a_beta_integral():
    w = make_weight("projection", M=3, m=2, l=1)
    assert abs(w.mellin(1.0) - 0.5) <= 1e-14
    assert abs(w.mellin_quadrature(1.0) - 0.5) <= 1e-9


@pytest.mark.parametrize("tag", sorted(catalog_weights()))
def test_catalog_mellin_matches_quadrature(tag):
    w, _ = catalog_weights()[tag]
    for s in (1.3, 2.0 + 0.7j):
        exact = w.mellin(s)
        assert abs(w.mellin_quadrature(s) - exact) <= 1e-7 * abs(exact)


def test_make_weight_validates():
    with pytest.raises(ValueError):
        make_weight("wigner")
    with pytest.raises(ValueError):
        make_weight("ginibre", nu=-2)
    with pytest.raises(ValueError):
        make_weight("projection", M=2)


# --- operator powers ---------------------------------------------------------

def test_first_operator_power():
    assert abs(polya_derivative(GINIBRE, 1, 2.0) - 2 * math.exp(-2)) <= 1e-14


def test_second_operator_power_vanishes_at_one():
    # (−a∂)^2 e^{−a} = (a² − a) e^{−a}
    assert abs(polya_derivative(GINIBRE, 2, 1.0)) <= 1e-14
    a = np.array([0.5, 2.0, 3.5])
    np.testing.assert_allclose(polya_derivative(GINIBRE, 2, a), (a**2 - a) * np.exp(-a), rtol=1e-13)


@pytest.mark.parametrize("tag", sorted(catalog_weights()))
def test_zeroth_operator_power_is_the_weight(tag):
    w, _ = catalog_weights()[tag]
    a = np.array([0.2, 0.7, 1.5])
    np.testing.assert_allclose(polya_derivative(w, 0, a), w(a), rtol=1e-14)


def test_operator_power_matches_finite_differences():
    w = make_weight("muttalib-borodin", nu=0.5, theta=2.0)
    a = np.array([0.4, 1.1, 2.3])
    exact = polya_derivative(w, 2, a)
    h = 1e-4
    fd = -(polya_derivative(w, 1, a * math.exp(h)) - polya_derivative(w, 1, a * math.exp(-h))) / (2 * h)
    np.testing.assert_allclose(exact, fd, rtol=1e-6)


def test_operator_power_beyond_order_needs_fallback():
    w = make_weight("projection", M=4, m=2, l=1)
    with pytest.raises(ValueError):
        polya_derivative(w, w.operator_power + 1, 0.5)


# --- Pólya ensemble densities ------------------------------------------------

def test_rank_one_density_is_the_weight():
    a = np.array([[0.3], [1.0], [2.5]])
    np.testing.assert_allclose(polya_jpdf(GINIBRE, 1, a), np.exp(-a[:, 0]), rtol=1e-14)


def test_rank_two_density_is_normalised():
    assert abs(orthant_mass(lambda a: polya_jpdf(GINIBRE, 2, a), 2) - 1.0) <= 1e-6


@settings(max_examples=8, deadline=None)
@given(st.integers(min_value=0, max_value=3), st.integers(min_value=1, max_value=2))
def test_ginibre_density_normalised_for_any_nu(nu, n):
    w = make_weight("ginibre", nu=nu)
    assert abs(orthant_mass(lambda a: polya_jpdf(w, n, a), n, hi=80.0) - 1.0) <= 1e-6


def test_rank_two_density_from_measure_constant():
    # I_G maps the Gaussian matrix density π^{-4} e^{-tr gg*} to the spectral density
    c = eigen_measure_constant("G", 2).constant
    rng = make_rng(40)
    a = rng.uniform(0.1, 4.0, (20, 2))
    via_constant = c * vandermonde(a) ** 2 * math.pi**-4 * np.exp(-a.sum(axis=1))
    np.testing.assert_allclose(polya_jpdf(GINIBRE, 2, a), via_constant, rtol=1e-12)


def test_rank_two_density_matches_sampled_gaussian_matrices():
    x, w = log_rule(1e-12, 60.0, order=16)

    def marginal(t):
        t = np.asarray(t, dtype=float)
        pts = np.stack([np.repeat(t, len(x)), np.tile(x, len(t))], axis=1)
        # one-point marginal of the symmetric density
        return polya_jpdf(GINIBRE, 2, pts).reshape(len(t), len(x)) @ w

    g = sample_ensemble_matrix("ginibre", 2, 2, 41, size=100_000)
    a = batch_sv2(g)
    rep = compare_density(a, marginal, np.concatenate([[0.0], np.geomspace(1e-3, 40.0, 60)]), seed=42)
    assert rep.sigma <= 3


def test_density_rejects_wrong_length():
    with pytest.raises(ValueError):
        polya_jpdf(GINIBRE, 2, [1.0, 2.0, 3.0])


# --- spherical transforms ----------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3])
def test_product_transform_is_normalised(n):
    for tag, (w, _) in catalog_weights().items():
        if w.distributional:
            continue
        assert abs(spherical_transform_polya(w, n, standard_frequency(n).s) - 1.0) <= 1e-12, tag


def test_product_transform_mean_of_exponential():
    assert abs(spherical_transform_polya(GINIBRE, 1, [1.0]) - 1.0) <= 1e-14


def test_product_transform_ginibre_two():
    val = spherical_transform_polya(GINIBRE, 2, [3.0, 0.0])
    assert abs(val - 6.0) <= 1e-12
    est = mc_expectation_spherical("ginibre", (2, 2), {}, [3.0, 0.0], 100_000, 43)
    assert est.sigmas(val) <= 3


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(sorted(catalog_weights())), st.floats(min_value=0.0, max_value=2.0),
       st.floats(min_value=0.1, max_value=2.0), st.floats(min_value=-1.0, max_value=1.0))
def test_product_and_determinant_forms_agree(tag, s0, gap, im):
    w, _ = catalog_weights()[tag]
    if w.distributional or w.kind == "cauchy-lorentz":
        return
    s = np.array([s0 + gap + 1j * im, s0 - 0.5j * im])
    prod = spherical_transform_polya(w, 2, s)
    det = spherical_transform_polynomial(PolynomialEnsembleG.from_polya(w, 2), s)
    assert abs(prod - det) <= 1e-10 * abs(prod)


def test_polynomial_transform_at_standard_frequency():
    ens = PolynomialEnsembleG.from_polya(make_weight("jacobi", nu=1, mu=2, n=3), 3)
    assert abs(spherical_transform_polynomial(ens, standard_frequency(3).s) - 1.0) <= 1e-10


def test_hermitian_polynomial_transform_matches_quadrature():
    def w1(x):
        return np.exp(-np.abs(x))

    def w2(x):
        return x * np.exp(-np.abs(x))

    def mel(b, s, L):
        s = np.asarray(s, dtype=complex)
        if b == 1:
            return (1 + (-1) ** L) * special.gamma(s)
        return (1 - (-1) ** L) * special.gamma(s + 1)

    ens = PolynomialEnsembleH(2, (w1, w2), mel)
    s, L = [2.0, 1.0], [0, 1]
    closed = spherical_transform_polynomial(ens, s, L)
    quad = spherical_transform_phi(ens.density, s, L)
    assert abs(closed - quad) <= 1e-6 * abs(closed)


# --- Pólya-frequency check ---------------------------------------------------

def test_ginibre_is_polya_frequency_of_order_three():
    assert polya_frequency_check(GINIBRE, 3).passed


def test_jacobi_is_polya_frequency_of_order_two():
    assert polya_frequency_check(make_weight("jacobi", nu=0, mu=1, n=2), 2).passed


def test_counterexample_fails_early():
    rep = polya_frequency_check(non_polya_weight, 2)
    assert not rep.passed and rep.failing_order <= 2


# --- measure constants and samplers ------------------------------------------

def test_measure_constants():
    assert eigen_measure_constant("H", 1).constant == 1.0
    assert abs(eigen_measure_constant("G", 1).constant - math.pi) <= 1e-14


def test_ginibre_scalar_moment():
    g = sample_ensemble_matrix("ginibre", 1, 1, 44, size=100_000)
    u = np.abs(g[:, 0, 0]) ** 2
    assert abs(u.mean() - 1.0) <= 3 * u.std() / math.sqrt(len(u))


def test_truncated_scalar_is_uniform():
    k = sample_ensemble_matrix("truncated", 1, 1, 45, M=2, size=100_000)
    u = np.abs(k[:, 0, 0]) ** 2
    assert abs(u.mean() - 0.5) <= 3 * math.sqrt(1 / 12 / len(u))
    assert stats.kstest(u, "uniform").pvalue > 2.7e-3


def test_rectangular_ginibre_transform():
    w = make_weight("ginibre", nu=1)
    for s in ([1.0, 0.0], [2.5, 0.3]):
        est = mc_expectation_spherical("ginibre", (3, 2), {}, s, 100_000, 46)
        assert est.sigmas(spherical_transform_polya(w, 2, s)) <= 3


def test_polya_matrix_sampler_matches_transform():
    w = make_weight("jacobi", nu=1, mu=2, n=2)
    g = sample_polya_matrix(w, 3, 2, 2, 47, size=50_000)
    vals = psi([1.7, 0.4], batch_sv2(g))
    err = vals.std() / math.sqrt(len(vals))
    assert abs(vals.mean() - spherical_transform_polya(w, 2, [1.7, 0.4])) <= 3 * err


def test_unsampleable_kind_is_rejected():
    with pytest.raises(ValueError):
        sample_ensemble_matrix("cauchy-lorentz", 2, 2, 0)
