"""Spherical functions, their Haar-average definition, transforms and factorisation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from polyaprod.ensembles import make_weight, polya_jpdf, spherical_transform_polya
from polyaprod.numerics import make_rng
from polyaprod.spherical import (Frequency, factorization_lhs_mc, factorization_rhs, inverse_spherical_phi,
                                 normalization_C, phi, phi_definition_mc, psi, rank_limit_check,
                                 spherical_transform_phi, spherical_transform_psi, standard_frequency,
                                 tabulated_transform_psi)

spectra = st.lists(st.floats(min_value=0.2, max_value=3.0), min_size=1, max_size=4, unique=True)


def separated_frequencies(n, rnd):
    """Frequencies with real parts at least 0.1 apart (coincident s with unequal L is a pole)."""
    re = -1.0 + np.cumsum([rnd.uniform(0.1, 1.0) for _ in range(n)])
    return re + 1j * np.array([rnd.uniform(-1, 1) for _ in range(n)])


def ginibre2(a):
    return polya_jpdf(make_weight("ginibre", nu=0), 2, a)


# --- closed forms ------------------------------------------------------------

def test_phi_single_entry():
    assert abs(phi([2.0], [1], [-3.0]) + 9.0) <= 1e-12


def test_phi_at_standard_frequency_is_one():
    f = standard_frequency(2)
    assert f.s == (1.0, 0.0) and f.L == (1, 0)
    assert abs(phi(f.s, f.L, [1.0, 2.0]) - 1.0) <= 1e-12


def test_phi_two_by_two_determinant_ratio():
    # det[[1, 4], [1, 1]] / ((2 - 1)(0 - 2)) = 3/2
    assert abs(phi([2.0, 0.0], [0, 0], [1.0, 2.0]) - 1.5) <= 1e-12


def test_psi_single_entry():
    assert abs(psi([1.5], [4.0]) - 8.0) <= 1e-12


def test_psi_two_by_two():
    assert abs(psi([2.0, 0.0], [1.0, 4.0]) - 2.5) <= 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_psi_is_normalised_at_standard_frequency(n):
    a = make_rng(n).uniform(0.1, 5.0, n)
    assert abs(psi(standard_frequency(n).s, a) - 1.0) <= 1e-10


def test_frequency_validation():
    with pytest.raises(ValueError):
        Frequency((1.0,), (2,))
    with pytest.raises(ValueError):
        Frequency((1.0, 0.0), (0,))


def test_phi_rejects_zero_eigenvalue():
    with pytest.raises(ValueError):
        phi([1.0, 0.0], [0, 0], [0.0, 1.0])


@settings(max_examples=60, deadline=None)
@given(spectra, st.floats(min_value=-1, max_value=1), st.floats(min_value=-1, max_value=1),
       st.integers(min_value=0, max_value=1), st.randoms(use_true_random=False))
def test_shift_identities(a_pos, mu_re, mu_im, j, rnd):
    n = len(a_pos)
    a_pos = np.array(a_pos)
    s = separated_frequencies(n, rnd)
    L = np.array([rnd.randint(0, 1) for _ in range(n)])
    a = a_pos * np.array([rnd.choice((-1.0, 1.0)) for _ in range(n)])
    mu = complex(mu_re, mu_im)
    # relative to the compared value, which is |∏a|^Re μ times the base value
    rhs = np.prod(a_pos) ** mu * psi(s, a_pos)
    assert abs(psi(s + mu, a_pos) - rhs) <= 1e-10 * abs(rhs)
    pa = np.prod(a)
    rhs = np.sign(pa) ** j * abs(pa) ** mu * phi(s, L, a)
    assert abs(phi(s + mu, (L + j) % 2, a) - rhs) <= 1e-10 * abs(rhs)


@settings(max_examples=60, deadline=None)
@given(spectra, st.randoms(use_true_random=False))
def test_permutation_invariance(a_pos, rnd):
    n = len(a_pos)
    a = np.array(a_pos) * np.array([rnd.choice((-1.0, 1.0)) for _ in range(n)])
    s = separated_frequencies(n, rnd)
    L = np.array([rnd.randint(0, 1) for _ in range(n)])
    ps, pa = list(range(n)), list(range(n))
    rnd.shuffle(ps)
    rnd.shuffle(pa)
    base = phi(s, L, a)
    assert abs(phi(s[ps], L[ps], a[pa]) - base) <= 1e-12 * max(1.0, abs(base)) * 10


def test_phi_handles_coincident_eigenvalues_by_continuity():
    s, L = np.array([2.3, 0.4]), np.array([1, 0])
    near = phi(s, L, [1.0, 1.0 + 1e-7])
    exact = phi(s, L, [1.0, 1.0])
    assert abs(exact - near) <= 1e-5 * abs(exact)


def test_phi_handles_coincident_frequencies_by_continuity():
    a = np.array([0.7, -1.9])
    near = phi([1.3, 1.3 + 1e-7], [0, 0], a)
    exact = phi([1.3, 1.3], [0, 0], a)
    assert abs(exact - near) <= 1e-5 * abs(exact)


# --- normalisation constant --------------------------------------------------

def test_constant_is_one_at_full_rank():
    assert normalization_C(3, 3, [0.3 + 1j, 2.0, -0.4]) == 1.0


def test_constant_rank_one_in_two_dims():
    # E|k11|^2 over U(2) is 1/2
    assert abs(normalization_C(2, 1, [1.0]) - 0.5) <= 1e-12


def test_constant_rank_one_in_three_dims():
    # |k11|^2 ~ Beta(1, 2) over U(3), mean 1/3
    assert abs(normalization_C(3, 1, [1.0]) - 1 / 3) <= 1e-12


def test_constant_rejects_rank_above_dimension():
    with pytest.raises(ValueError):
        normalization_C(1, 2, [1.0, 0.0])


# --- Haar-average definition -------------------------------------------------

def test_definition_exact_for_scalar_case():
    est = phi_definition_mc([1.7], [1], [-2.0], 1, 100, 0)
    assert abs(est.ratio.value - (-(2.0 ** 1.7))) <= 1e-12


def test_definition_full_rank_two():
    est = phi_definition_mc([2.5, 0.0], [0, 0], [1.0, 2.0], 2, 100_000, 11)
    assert est.ratio.sigmas(phi([2.5, 0.0], [0, 0], [1.0, 2.0])) <= 3


def test_definition_embedded_rank_one():
    s, L, a = [1.3], [1], [-1.5]
    est = phi_definition_mc(s, L, a, 2, 100_000, 12)
    assert est.numerator.sigmas(normalization_C(2, 1, s) * phi(s, L, a)) <= 3


# --- transforms --------------------------------------------------------------

def test_transform_at_standard_frequency_is_total_mass():
    f = standard_frequency(2)
    val = spherical_transform_phi(ginibre2, f.s, f.L, support="positive")
    assert abs(val - 1.0) <= 1e-6


def test_transform_of_exponential_is_shifted_gamma():
    def p(a):
        return np.exp(-a[:, 0])
    for s in (1.0, 2.0, 0.5 + 1j):
        val = spherical_transform_phi(p, [s], [1], support="positive")
        assert abs(val - special.gamma(s + 1)) <= 1e-8


def test_psi_transform_of_ginibre_matches_product_formula():
    w = make_weight("ginibre", nu=0)
    for s in ([1.3, 0.2], [2.0 + 0.5j, 0.7 - 0.3j]):
        val = spherical_transform_psi(ginibre2, s)
        assert abs(val - spherical_transform_polya(w, 2, s)) <= 1e-6 * abs(val)


def test_tabulated_transform_matches_direct_quadrature():
    table = tabulated_transform_psi(ginibre2, 2)
    s = np.array([[1.3 + 0.4j, 0.2 - 0.1j]])
    direct = spherical_transform_psi(ginibre2, s[0])
    assert abs(table(s)[0] - direct) <= 1e-8 * abs(direct)


@pytest.mark.slow
def test_round_trip_ginibre_two():
    table = tabulated_transform_psi(ginibre2, 2)
    a = np.array([1.0, 2.0])
    back = inverse_spherical_phi(lambda fr, L: table(fr), a)
    assert abs(back / ginibre2(a) - 1) <= 1e-3


def test_round_trip_scalar_laplace():
    def transform(fr, L):
        # p(a) = e^{-|a|}/2 is even: Γ(s+1) in the even channel, nothing in the odd one
        return special.gamma(fr[:, 0] + 1) * (1 if L[0] == 0 else 0)
    back = inverse_spherical_phi(transform, np.array([1.0]))
    assert abs(back - math.exp(-1) / 2) <= 1e-4


@pytest.mark.slow
def test_positive_support_gives_zero_on_mixed_signs():
    table = tabulated_transform_psi(ginibre2, 2)
    back = inverse_spherical_phi(lambda fr, L: table(fr), np.array([-1.0, 2.0]))
    assert abs(back) <= 1e-3


# --- factorisation -----------------------------------------------------------

def test_factorization_scalar_case():
    s, L = [1.4], [1]
    val = factorization_rhs(s, L, 1, 1, 1, 1, [2.0], [-3.0])
    assert abs(val - 2.0 ** 1.4 * (-(3.0 ** 1.4))) <= 1e-12


def test_factorization_full_rank_two():
    s, L, ag, ax = [1.2, 0.3], [1, 0], [0.5, 1.7], [-1.0, 2.0]
    rhs = factorization_rhs(s, L, 2, 2, 2, 2, ag, ax)
    assert abs(rhs - psi(s, ag) * phi(s, L, ax)) <= 1e-12 * abs(rhs)
    lhs = factorization_lhs_mc(s, L, 2, 2, 2, 2, ag, ax, 100_000, 21)
    assert lhs.sigmas(rhs) <= 3


def test_factorization_projection_case():
    # l = 1, m = 2: a row of a Haar unitary; E|k11|^{2s} = Γ(s+1)Γ(2)/Γ(s+2) = 1/(s+1)
    s = [0.8]
    rhs = factorization_rhs(s, [0], 1, 2, 1, 1, [1.0], [1.0])
    assert abs(rhs - 1 / 1.8) <= 1e-12
    lhs = factorization_lhs_mc(s, [0], 1, 2, 1, 1, [1.0], [1.0], 100_000, 22)
    assert lhs.sigmas(rhs) <= 3


def test_factorization_rejects_bad_profile():
    with pytest.raises(ValueError):
        factorization_rhs([1.0], [0], 1, 2, 2, 1, [1.0, 2.0], [1.0])


# --- rank-reduction limit ----------------------------------------------------

@pytest.mark.parametrize("n", [2, 3])
def test_rank_limit(n):
    rng = make_rng(30 + n)
    s = rng.uniform(1.5, 3.0, n - 1)
    a = rng.uniform(0.5, 2.0, n - 1)
    res = rank_limit_check(s, a)
    assert res.rel_diff <= 1e-4


def test_rank_limit_wrong_order_is_flagged():
    res = rank_limit_check([2.0], [1.3])
    assert res.wrong_order_diverges
