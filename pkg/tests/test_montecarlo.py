"""Matrix-level sampling, co-rank-one projections and goodness-of-fit checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from polyaprod.ensembles import make_weight, spherical_transform_polya
from polyaprod.montecarlo import (compare_density, corank1_density, corank1_project, interlaces,
                                  mc_expectation_spherical, product_support, sample_product_eigs)
from polyaprod.numerics import gauss_panels, make_rng
from polyaprod.products import FixedSpectrum, ProductSpec, kernel_fixed, level_density

G0 = make_weight("ginibre", nu=0)


def fixed(l, m, n1, n2, a, branch, weight=G0):
    return ProductSpec(l, m, n1, n2, weight, FixedSpectrum(tuple(a)), branch)


# --- products ------------------------------------------------------------------

def test_scalar_product_is_scaled_exponential():
    batch = sample_product_eigs(fixed(1, 1, 1, 1, (3.0,), "geq"), 100_000, seed=60)
    x = batch.eigenvalues[:, 0]
    assert abs(x.mean() - 3.0) <= 3 * 3.0 / math.sqrt(len(x))
    assert stats.kstest(x / 3.0, "expon").pvalue > 2.7e-3


def test_signature_is_conserved_by_congruence():
    batch = sample_product_eigs(fixed(2, 2, 2, 2, (-1.0, 2.0), "geq"), 20_000, seed=61)
    ev = batch.eigenvalues
    assert np.all(np.sum(ev < 0, axis=1) == 1) and np.all(np.sum(ev > 0, axis=1) == 1)


def test_rank_one_factor_gives_one_eigenvalue():
    batch = sample_product_eigs(fixed(2, 2, 1, 2, (1.0, 2.0), "less"), 20_000, seed=62)
    assert batch.eigenvalues.shape == (20_000, 1)
    assert batch.metadata["degenerate"] == 0


def test_sampling_is_reproducible():
    spec = fixed(2, 3, 2, 2, (-1.0, 2.0), "geq")
    a = sample_product_eigs(spec, 5_000, seed=7).eigenvalues
    b = sample_product_eigs(spec, 5_000, seed=7).eigenvalues
    c = sample_product_eigs(spec, 5_000, seed=8).eigenvalues
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sampling_rejects_analytic_only_weight():
    spec = fixed(1, 1, 1, 1, (1.0,), "geq", make_weight("lognormal", nu=0.2))
    with pytest.raises(ValueError):
        sample_product_eigs(spec, 10)


def test_fixed_product_matches_kernel_level_density():
    spec = fixed(2, 2, 2, 2, (1.0, 2.0), "geq")
    batch = sample_product_eigs(spec, 100_000, seed=63)
    rep = compare_density(batch, level_density(kernel_fixed(spec)), product_support(spec), seed=64)
    assert rep.passed and rep.sigma <= 3


# --- co-rank-one projection ------------------------------------------------------

@pytest.mark.parametrize("a", [(-1.0, 2.0), (0.3, 1.1, 2.5), (-2.0, -0.5, 0.7, 3.0)])
def test_projection_interlaces(a):
    ap = corank1_project(a, 20_000, seed=65)
    assert ap.shape == (20_000, len(a) - 1)
    assert np.all(interlaces(a, ap))


def test_two_by_two_projection_is_uniform():
    a = np.array([-1.0, 2.0])
    ap = corank1_project(a, 100_000, seed=66)[:, 0]
    assert stats.kstest(ap, "uniform", args=(a[0], a[1] - a[0])).pvalue > 2.7e-3
    rep = compare_density(ap[:, None], lambda x: corank1_density(np.asarray(x)[:, None], a),
                          np.linspace(a[0], a[1], 9), seed=67)
    assert rep.sigma <= 3


def test_projection_density_is_normalised():
    a = np.array([0.3, 1.1, 2.5])
    x, w = gauss_panels(a, 8)
    grid = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    assert abs(np.outer(w, w).ravel() @ corank1_density(grid, a) - 1.0) <= 1e-6


def test_projection_density_vanishes_off_interlacing():
    a = np.array([0.3, 1.1, 2.5])
    assert corank1_density(np.array([[0.5, 0.9]]), a)[0] == 0.0
    assert corank1_density(np.array([[0.5, 1.9]]), a)[0] > 0.0


def test_projection_rejects_degenerate_spectrum():
    with pytest.raises(ValueError):
        corank1_project([1.0, 1.0], 10)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(min_value=-5, max_value=5), min_size=2, max_size=5, unique=True)
       .filter(lambda v: min(np.diff(np.sort(v))) > 1e-3), st.integers(0, 2**31))
def test_projection_interlaces_for_any_spectrum(a, seed):
    assert np.all(interlaces(a, corank1_project(a, 200, seed=seed)))


# --- goodness of fit ---------------------------------------------------------------

def test_goodness_of_fit_accepts_true_density():
    x = make_rng(68).exponential(size=(10_000, 1))
    rep = compare_density(x, lambda t: np.exp(-np.asarray(t)), np.linspace(0.0, 40.0, 81), seed=1)
    assert rep.passed


def test_goodness_of_fit_rejects_wrong_density():
    x = make_rng(69).exponential(size=(10_000, 1))
    rep = compare_density(x, lambda t: np.exp(-np.asarray(t) / 2) / 2, np.linspace(0.0, 80.0, 161), seed=1)
    assert not rep.passed and rep.sigma > 3


def test_chi_square_variant():
    x = make_rng(70).exponential(size=(20_000, 1))
    rep = compare_density(x, lambda t: np.exp(-np.asarray(t)), np.linspace(0.0, 40.0, 81), test="chi2", seed=1)
    assert rep.passed


# --- spherical transforms as expectations ----------------------------------------

def test_mean_of_scalar_ginibre():
    est = mc_expectation_spherical("ginibre", (1, 1), {}, [1.0], 100_000, 71)
    assert est.sigmas(1.0) <= 3


def test_truncated_unitary_second_moment():
    est = mc_expectation_spherical("truncated", (1, 1), {"M": 2}, [2.0], 100_000, 72)
    assert est.sigmas(1 / 3) <= 3
    closed = spherical_transform_polya(make_weight("projection", M=2, m=1, l=1), 1, [2.0])
    assert abs(closed - 1 / 3) <= 1e-14


def test_polya_sampler_expectation():
    w = make_weight("jacobi", nu=1, mu=2, n=2)
    est = mc_expectation_spherical("polya", (2, 3), {"weight": w}, [1.5, 0.2], 100_000, 73)
    assert est.sigmas(spherical_transform_polya(w, 2, [1.5, 0.2])) <= 3
