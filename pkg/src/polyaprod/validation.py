"""Acceptance matrix: analytic cross-checks and Monte Carlo comparisons.

Each criterion is a function ``criterion_N(seed, samples) -> list[Check]``;
:func:`run_criteria` times them and collects a JSON-friendly report keyed
by check name.  Every Monte Carlo check follows the same flaky-test
policy: on failure it is re-run once with a second fixed seed and fails
only if both runs fail.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import __version__
from .ensembles import (PolynomialEnsembleG, gue_ensemble, make_weight, polya_frequency_check, polya_jpdf,
                        spherical_transform_polya, spherical_transform_polynomial, wishart_ensemble)
from .mellin import UnivariateFunction, inverse_mellin_points, mellin_full_line
from .montecarlo import (compare_density, corank1_density, corank1_project, interlaces, mc_expectation_spherical,
                         product_support, sample_product_eigs)
from .numerics import gauss_panels, make_rng, squared_singular_values
from .products import (FixedSpectrum, ProductSpec, biorth_fixed, elementary_orthogonality, ensemble_biorth,
                       jpdf_fixed, jpdf_normalization, jpdf_random, kernel_fixed, level_density, spectrum_rule,
                       transform_biorth, transform_kernel)
from .spherical import (factorization_lhs_mc, factorization_rhs, inverse_spherical_phi, normalization_C, phi,
                        phi_definition_mc, psi, tabulated_transform_psi)

__all__ = ["Check", "CriterionResult", "CRITERIA", "RETRY_OFFSET", "run_criterion", "run_criteria", "SUITES"]

SIGMA = 3.0
RETRY_OFFSET = 7919  # second fixed seed = seed + RETRY_OFFSET


@dataclass
class Check:
    """One named comparison: ``value`` against ``tolerance`` (or σ for MC)."""

    name: str
    passed: bool
    value: float
    tolerance: float
    kind: str = "analytic"  # analytic | mc | report
    detail: dict = field(default_factory=dict)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    seconds: float
    budget: Optional[float]
    checks: list

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        worst = [c for c in self.checks if not c.passed and c.kind != "report"]
        tail = f" (failed: {', '.join(c.name for c in worst)})" if worst else ""
        limit = f" / {self.budget:.0f}s" if self.budget is not None else ""
        return f"criterion {self.number}: {status} - {self.title} [{self.seconds:.1f}s{limit}]{tail}"


def _analytic(name: str, err: float, tol: float, **detail) -> Check:
    err = float(err)
    return Check(name, bool(np.isfinite(err) and err <= tol), err, tol, "analytic", detail)


def _mc(name: str, run: Callable[[int], tuple], seed: int) -> Check:
    """Run ``run(seed) -> (sigma, detail)``; retry once with a second seed."""
    sigma, detail = run(seed)
    detail = dict(detail, seed=seed)
    if sigma <= SIGMA:
        return Check(name, True, float(sigma), SIGMA, "mc", detail)
    sigma2, detail2 = run(seed + RETRY_OFFSET)
    detail2 = dict(detail2, seed=seed + RETRY_OFFSET, first_sigma=float(sigma), first_seed=seed, retried=True)
    return Check(name, bool(sigma2 <= SIGMA), float(sigma2), SIGMA, "mc", detail2)


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(b))), 1e-300))


def _cplx(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


# ---------------------------------------------------------------------------
# 1. definition of Φ as a Haar average vs the closed form

def _admissible_frequency(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    s = np.empty(n, dtype=complex)
    s[-1] = rng.uniform(0.0, 1.5) + 1j * rng.uniform(-0.5, 0.5)
    for j in range(n - 2, -1, -1):
        s[j] = s[j + 1] + 1.0 + rng.uniform(0.0, 1.0) + 1j * rng.uniform(-0.5, 0.5)
    return s, rng.integers(0, 2, n)


def _signed_spectrum(n: int, rng, lo: float = 0.4, hi: float = 2.5) -> np.ndarray:
    while True:
        a = rng.uniform(lo, hi, n) * rng.choice([-1.0, 1.0], n)
        if n == 1 or np.min(np.diff(np.sort(a))) > 0.2:
            return a


def criterion_1(seed: int, samples: int) -> list:
    rng = make_rng(seed)
    checks = []
    for n, l in [(1, 1), (1, 2), (2, 2), (2, 3)]:
        for i in range(5):
            s, L = _admissible_frequency(n, rng)
            a = _signed_spectrum(n, rng)
            target = complex(normalization_C(l, n, s) * phi(s, L, a))

            def run(sd, s=s, L=L, a=a, l=l, target=target):
                est = phi_definition_mc(s, L, a, l, samples, sd).numerator
                return est.sigmas(target), dict(mc=_cplx(est.value), stderr=est.stderr, closed=_cplx(target))

            checks.append(_mc(f"definition_n{n}_l{l}_f{i}", run, seed + 101 * i + 11 * l + n))
    return checks


# ---------------------------------------------------------------------------
# 2. factorisation of the Haar average over the middle unitary

FACTORIZATION_PATTERNS = [  # (l, m, n1, n2)
    (2, 2, 1, 2),  # n1 < n2, square g
    (1, 3, 1, 2),  # n1 < n2, rectangular g
    (3, 3, 2, 1),  # n1 > n2, square g
    (3, 2, 2, 1),  # n1 > n2, rectangular g
    (2, 3, 2, 2),  # n1 = n2, rectangular g
]


def criterion_2(seed: int, samples: int) -> list:
    rng = make_rng(seed + 2)
    checks = []
    for (l, m, n1, n2) in FACTORIZATION_PATTERNS:
        r = min(n1, n2)
        for i in range(2):
            s = np.sort(rng.uniform(0.2, 2.2, r))[::-1] + 1j * rng.uniform(-0.6, 0.6, r)
            L = rng.integers(0, 2, r)
            a_g = np.sort(rng.uniform(0.3, 2.0, n1))
            a_x = _signed_spectrum(n2, rng)
            target = factorization_rhs(s, L, l, m, n1, n2, a_g, a_x)

            def run(sd, s=s, L=L, a_g=a_g, a_x=a_x, l=l, m=m, n1=n1, n2=n2, target=target):
                est = factorization_lhs_mc(s, L, l, m, n1, n2, a_g, a_x, samples, sd)
                return est.sigmas(target), dict(mc=_cplx(est.value), stderr=est.stderr, rhs=_cplx(target))

            checks.append(_mc(f"factorization_l{l}m{m}_n{n1}{n2}_f{i}", run, seed + 37 * i + 5 * l + m))
    return checks


# ---------------------------------------------------------------------------
# 3. round trips of the transforms

def _roundtrip_functions():
    return {
        "laplace_even": (UnivariateFunction(lambda x: 0.5 * np.exp(-np.abs(x)), "full"), (-2.0, -0.5, 1.0, 3.0)),
        "abs_laplace": (UnivariateFunction(lambda x: np.abs(x) * np.exp(-np.abs(x)), "full"), (-2.0, 0.7, 2.0)),
        "skew_gauss": (UnivariateFunction(lambda x: x**2 * np.exp(-(x - 0.5) ** 2), "full"), (-1.0, 0.8, 2.0)),
    }


def criterion_3(seed: int, samples: int) -> list:
    checks = []
    for name, (f, points) in _roundtrip_functions().items():
        def Mf(s, L, f=f):
            return mellin_full_line(f, s, L, method="fixed")

        back = inverse_mellin_points(Mf, points)
        errs = [abs(b.value - float(f(np.array([x]))[0])) for b, x in zip(back, points)]
        checks.append(_analytic(f"mellin_roundtrip_{name}", max(errs), 1e-4, points=list(points)))
    weight = make_weight("ginibre", nu=0)
    transform = tabulated_transform_psi(lambda a: polya_jpdf(weight, 2, a), 2)
    for a in [(1.0, 2.0), (0.5, 3.0), (0.3, 0.9), (2.0, 4.5), (1.2, 1.6)]:
        a = np.asarray(a)
        back = inverse_spherical_phi(lambda fr, L: transform(fr), a)
        exact = float(polya_jpdf(weight, 2, a))
        checks.append(_analytic(f"spherical_roundtrip_ginibre2_{a[0]:g}_{a[1]:g}", abs(back / exact - 1), 1e-3,
                                recovered=back, density=exact))
    return checks


# ---------------------------------------------------------------------------
# 4. spherical transforms of Pólya ensembles, three ways

ENSEMBLE_CASES = [  # (kind, l, m, M)
    ("ginibre", 1, 1, None), ("ginibre", 1, 2, None), ("ginibre", 2, 2, None), ("ginibre", 2, 3, None),
    ("truncated", 1, 1, 2), ("truncated", 1, 2, 3), ("truncated", 2, 2, 4), ("truncated", 2, 3, 6),
]


def _case_weight(kind, l, m, M):
    if kind == "ginibre":
        return make_weight("ginibre", nu=abs(l - m))
    return make_weight("projection", M=M, m=max(l, m), l=min(l, m))


def criterion_4(seed: int, samples: int) -> list:
    rng = make_rng(seed + 4)
    checks = []
    for kind, l, m, M in ENSEMBLE_CASES:
        n = min(l, m)
        w = _case_weight(kind, l, m, M)
        for i in range(2):
            s = rng.uniform(0.0, 2.0, n) + 1j * rng.uniform(-1.0, 1.0, n)
            prod = spherical_transform_polya(w, n, s)
            det = spherical_transform_polynomial(PolynomialEnsembleG.from_polya(w, n), s)
            tag = f"{kind}_{l}x{m}" + (f"_M{M}" if M else "") + f"_f{i}"
            checks.append(_analytic(f"product_vs_determinant_{tag}", abs(prod - det) / abs(prod), 1e-10))

            def run(sd, s=s, prod=prod, kind=kind, l=l, m=m, M=M):
                est = mc_expectation_spherical(kind, (l, m), {"M": M} if M else {}, s, samples, sd)
                return est.sigmas(prod), dict(mc=_cplx(est.value), stderr=est.stderr, closed=_cplx(prod))

            checks.append(_mc(f"mc_vs_closed_{tag}", run, seed + 13 * i + 3 * l + m))
    return checks


# ---------------------------------------------------------------------------
# 5. products with a fixed Hermitian factor

def fixed_cases():
    g1 = make_weight("ginibre", nu=1)
    return {
        "geq_r2_mixed": ProductSpec(2, 3, 2, 2, g1, FixedSpectrum((-1.0, 2.0)), "geq"),
        "geq_r1": ProductSpec(3, 3, 2, 1, make_weight("ginibre", nu=0), FixedSpectrum((1.5,)), "geq"),
        "geq_r2_projection": ProductSpec(2, 3, 2, 2, make_weight("projection", M=5, m=3, l=2),
                                         FixedSpectrum((-1.0, 2.0)), "geq"),
        "less_r1_mixed": ProductSpec(2, 3, 1, 2, make_weight("jacobi", nu=1, mu=2, n=1),
                                     FixedSpectrum((-1.0, 2.0)), "less"),
        "less_r2": ProductSpec(3, 3, 2, 3, make_weight("ginibre", nu=0), FixedSpectrum((0.5, -1.5, 3.0)), "less"),
        "less_r2_square": ProductSpec(2, 2, 2, 2, make_weight("ginibre", nu=0), FixedSpectrum((1.0, 3.0)), "less"),
    }


def _points_for(spec: ProductSpec, rng, count: int = 6) -> np.ndarray:
    """Points in the bulk of the spectrum; with r = n₂ coordinate j follows a_j."""
    a = spec.x_side.array
    u = rng.uniform(0.05, 0.95, (count, spec.r))
    if spec.r == len(a):
        return u * a[None, :]
    return u * rng.choice(a, (count, spec.r))


def _determinantal_error(spec, kernel, density, pts) -> float:
    r = spec.r
    dk = np.array([np.linalg.det(np.atleast_2d(np.real(kernel(p[:, None], p[None, :])))) for p in pts])
    dk /= math.factorial(r)
    ref = density(pts)
    if not np.any(ref != 0):
        return math.inf  # no point inside the support: the comparison would be vacuous
    return _rel(dk, ref)


def _ks_check(name, spec, kernel, samples, seed):
    dens = level_density(kernel)
    edges = product_support(spec)

    def run(sd):
        batch = sample_product_eigs(spec, samples, seed=sd)
        rep = compare_density(batch, dens, edges, seed=sd + 1)
        signs = np.unique(np.sum(np.sign(batch.eigenvalues), axis=1)).tolist()
        return rep.sigma, dict(statistic=rep.statistic, pvalue=rep.pvalue, signature_sums=signs,
                               density_mass=rep.extra["density_mass"])

    return _mc(name, run, seed)


def criterion_5(seed: int, samples: int) -> list:
    rng = make_rng(seed + 5)
    checks = []
    for i, (tag, spec) in enumerate(fixed_cases().items()):
        checks.append(_analytic(f"normalization_{tag}", abs(jpdf_normalization(spec) - 1), 1e-5))
        x, w = spectrum_rule(spec)
        G = biorth_fixed(spec).gram(x, w)
        checks.append(_analytic(f"biorthonormality_{tag}", np.max(np.abs(G - np.eye(spec.r))), 1e-6))
        K = kernel_fixed(spec)
        err = _determinantal_error(spec, K, lambda p: jpdf_fixed(spec, p), _points_for(spec, rng))
        checks.append(_analytic(f"det_kernel_{tag}", err, 1e-8))
        checks.append(_ks_check(f"ks_{tag}", spec, K, samples, seed + 17 * i))
    # signature conservation on the mixed-sign spectrum a = (−1, 2): exactly one eigenvalue per sign
    spec = fixed_cases()["geq_r2_mixed"]
    ev = sample_product_eigs(spec, min(samples, 20000), seed=seed).eigenvalues
    bad = int(np.sum((np.sum(ev > 0, axis=1) != 1) | (np.sum(ev < 0, axis=1) != 1)))
    checks.append(_analytic("signature_conservation_geq_r2_mixed", bad, 0))
    return checks


# ---------------------------------------------------------------------------
# 6. products with a random Hermitian factor

def random_cases():
    g0 = make_weight("ginibre", nu=0)
    return {
        "wishart_geq": ProductSpec(3, 3, 2, 2, g0, wishart_ensemble(2), "geq"),
        "gue_geq": ProductSpec(3, 3, 2, 2, make_weight("ginibre", nu=1), gue_ensemble(2), "geq"),
        "gue_geq_r1": ProductSpec(3, 3, 3, 1, g0, gue_ensemble(1), "geq"),
        "neg_wishart_less": ProductSpec(2, 2, 1, 2, g0, wishart_ensemble(2, sign=-1), "less"),
        "gue_less": ProductSpec(2, 2, 1, 2, g0, gue_ensemble(2), "less"),
    }


def criterion_6(seed: int, samples: int) -> list:
    rng = make_rng(seed + 6)
    checks = []
    for i, (tag, spec) in enumerate(random_cases().items()):
        ens = spec.x_side
        pts = rng.uniform(0.1, 3.0, (6, spec.r))
        if ens.support == "negative":
            pts = -pts
        elif ens.support == "full":
            pts *= rng.choice([-1.0, 1.0], pts.shape)
        a = jpdf_random(spec, pts, "mellin")
        b = jpdf_random(spec, pts, "biorth")
        checks.append(_analytic(f"mellin_vs_biorth_{tag}", _rel(b, a), 1e-8))
        tb = transform_biorth(spec)
        x, w = spectrum_rule(spec)
        checks.append(_analytic(f"transformed_biorthonormality_{tag}", np.max(np.abs(tb.gram(x, w) - np.eye(spec.r))),
                                1e-6))
        K1, K2 = tb.kernel(), transform_kernel(spec)
        x1, x2 = pts[:, 0], pts[:, -1][::-1]
        checks.append(_analytic(f"transformed_kernel_{tag}", _rel(K2(x1, x2), K1(x1, x2)), 1e-6))
        if i in (0, 1, 4):
            checks.append(_ks_check(f"ks_random_{tag}", spec, K1, samples, seed + 23 * i))
    # inclusion into a unitary of the same size: g is an isometry and x is untouched
    ens = gue_ensemble(2)
    spec = ProductSpec(3, 2, 2, 2, make_weight("projection", M=3, m=2, l=3), ens, "geq")
    pts = rng.uniform(-3.0, 3.0, (8, 2))
    checks.append(_analytic("isometric_inclusion_jpdf", _rel(jpdf_random(spec, pts), ens.density(pts)), 1e-8))
    K0 = ensemble_biorth(ens).kernel()
    K = transform_kernel(spec)
    checks.append(_analytic("isometric_inclusion_kernel", _rel(K(pts[:, 0], pts[:, 1]), K0(pts[:, 0], pts[:, 1])),
                            1e-8))
    return checks


# ---------------------------------------------------------------------------
# 7. co-rank-one projection and the elementary-symmetric identity

def criterion_7(seed: int, samples: int) -> list:
    checks = []
    for a in [(-1.0, 2.0), (0.3, 1.1, 2.5), (-2.0, -0.5, 0.7, 3.0)]:
        ap = corank1_project(a, min(samples, 50000), seed=seed + len(a))
        checks.append(_analytic(f"interlacing_l{len(a)}", int(np.sum(~interlaces(a, ap))), 0))
    a2 = np.array([-1.0, 2.0])

    def run(sd):
        ap = corank1_project(a2, samples, seed=sd)
        rep = compare_density(ap, lambda x: corank1_density(np.asarray(x)[:, None], a2),
                              np.linspace(a2[0], a2[1], 9), seed=sd + 1)
        return rep.sigma, dict(statistic=rep.statistic, pvalue=rep.pvalue)

    checks.append(_mc("ks_corank1_l2", run, seed + 70))
    a3 = np.array([0.3, 1.1, 2.5])
    x, w = gauss_panels(a3, 8)
    grid = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    mass = float(np.outer(w, w).ravel() @ corank1_density(grid, a3))
    checks.append(_analytic("normalization_corank1_l3", abs(mass - 1), 1e-6))
    rng = make_rng(seed + 7)
    worst = 0.0
    for _ in range(5):
        a = _signed_spectrum(3, rng)
        worst = max(worst, float(np.max(np.abs(elementary_orthogonality(a) - np.eye(3)))))
    checks.append(_analytic("elementary_symmetric_orthogonality_n3", worst, 1e-10))
    return checks


# ---------------------------------------------------------------------------
# 8. shift identities, symmetries and the Pólya-frequency property

def catalog_weights():
    return {
        "ginibre_0": (make_weight("ginibre", nu=0), 3),
        "ginibre_1.5": (make_weight("ginibre", nu=1.5), 3),
        "jacobi_0_1_2": (make_weight("jacobi", nu=0, mu=1, n=2), 2),
        "cauchy_lorentz": (make_weight("cauchy-lorentz", nu=0.2, mu=1.0, n=2), 2),
        "muttalib_borodin": (make_weight("muttalib-borodin", nu=0.3, theta=0.7), 3),
        "lognormal": (make_weight("lognormal", nu=0.4), 3),
        "projection_5_3_2": (make_weight("projection", M=5, m=3, l=2), 2),
    }


def non_polya_weight(a):
    """|sin(3 ln a)| + 0.01: positive but not a Pólya frequency function."""
    return np.abs(np.sin(3.0 * np.log(a))) + 0.01


def criterion_8(seed: int, samples: int) -> list:
    rng = make_rng(seed + 8)
    checks = []
    psi_err = phi_err = perm_err = 0.0
    for _ in range(40):
        n = int(rng.integers(1, 5))
        s = rng.uniform(-1.0, 3.0, n) + 1j * rng.uniform(-1.0, 1.0, n)
        L = rng.integers(0, 2, n)
        a_pos = rng.uniform(0.2, 3.0, n)
        a = a_pos * rng.choice([-1.0, 1.0], n)
        mu = complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))
        j = int(rng.integers(0, 2))
        base = psi(s, a_pos)
        psi_err = max(psi_err, abs(psi(s + mu, a_pos) - np.prod(a_pos) ** mu * base) / abs(base))
        base = phi(s, L, a)
        pa = np.prod(a)
        shifted = phi(s + mu, (L + j) % 2, a)
        phi_err = max(phi_err, abs(shifted - np.sign(pa) ** j * abs(pa) ** mu * base) / abs(base))
        perm_s, perm_a = rng.permutation(n), rng.permutation(n)
        perm_err = max(perm_err, abs(phi(s[perm_s], L[perm_s], a[perm_a]) - base) / abs(base),
                       abs(psi(s[perm_s], a_pos[perm_a]) - psi(s, a_pos)) / abs(psi(s, a_pos)))
    checks.append(_analytic("shift_identity_psi", psi_err, 1e-10))
    checks.append(_analytic("shift_identity_phi", phi_err, 1e-10))
    checks.append(_analytic("permutation_invariance", perm_err, 1e-12))
    adj = 0.0
    for l, m in [(2, 3), (3, 2), (2, 4)]:
        g = rng.standard_normal((l, m)) + 1j * rng.standard_normal((l, m))
        s = rng.uniform(0.0, 2.0, min(l, m)) + 1j * rng.uniform(-1, 1, min(l, m))
        v1 = psi(s, squared_singular_values(g))
        v2 = psi(s, squared_singular_values(np.conj(g.T)))
        adj = max(adj, abs(v1 - v2) / abs(v1))
    checks.append(_analytic("adjoint_identity", adj, 1e-10))
    for tag, (w, order) in catalog_weights().items():
        rep = polya_frequency_check(w, order, rng=seed)
        checks.append(Check(f"polya_frequency_{tag}", rep.passed, rep.worst_margin, -1e-12, "analytic",
                            dict(order=order, margins={str(k): v for k, v in rep.margins.items()})))
    rep = polya_frequency_check(non_polya_weight, 2, rng=seed)
    checks.append(Check("polya_frequency_counterexample", True, rep.worst_margin, -1e-12, "report",
                        dict(detected_failure=not rep.passed, failing_order=rep.failing_order)))
    return checks


# ---------------------------------------------------------------------------

CRITERIA = {
    1: ("Haar-average definition of Φ vs C·Φ closed form", criterion_1, 120.0),
    2: ("factorisation of the Haar average (MC vs closed form)", criterion_2, 300.0),
    3: ("Mellin and spherical transform round trips", criterion_3, 180.0),
    4: ("Pólya ensemble transforms: product vs determinant vs MC", criterion_4, None),
    5: ("fixed Hermitian factor: JPDF, bi-orthonormality, kernel, KS", criterion_5, 600.0),
    6: ("random Hermitian factor: two JPDF forms, transformed system, KS", criterion_6, None),
    7: ("co-rank-one projection and elementary-symmetric identity", criterion_7, None),
    8: ("shift identities, symmetries, Pólya-frequency checks", criterion_8, None),
}

SUITES = {
    "core": tuple(CRITERIA),
    "analytic": (3, 8),
    "spherical": (1, 2, 3, 4),
    "products": (5, 6, 7),
}


def run_criterion(number: int, seed: int = 42, samples: int = 100_000) -> CriterionResult:
    title, fn, budget = CRITERIA[number]
    t0 = time.perf_counter()
    checks = fn(seed, samples)
    seconds = time.perf_counter() - t0
    if budget is not None:
        checks.append(_analytic("runtime_seconds", seconds, budget))
    passed = all(c.passed for c in checks if c.kind != "report")
    return CriterionResult(number, title, passed, seconds, budget, checks)


def run_criteria(numbers=None, seed: int = 42, samples: int = 100_000, progress: Callable | None = None) -> dict:
    """Run the selected criteria and return a JSON-serialisable report."""
    numbers = tuple(CRITERIA) if numbers is None else tuple(numbers)
    results = []
    for k in numbers:
        res = run_criterion(k, seed, samples)
        results.append(res)
        if progress is not None:
            progress(res)
    checks = {}
    for res in results:
        for c in res.checks:
            checks[f"c{res.number}.{c.name}"] = asdict(c)
    return {
        "version": __version__,
        "seed": seed,
        "samples": samples,
        "passed": all(r.passed for r in results),
        "criteria": {str(r.number): dict(title=r.title, passed=r.passed, seconds=round(r.seconds, 3),
                                         budget=r.budget, checks=len(r.checks)) for r in results},
        "checks": checks,
    }
