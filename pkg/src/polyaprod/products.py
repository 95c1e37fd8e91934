"""Eigenvalue statistics of g x g* for a Pólya ensemble g and Hermitian x.

Setting: g is an l×m complex matrix of rank n₁ whose squared singular values
form a Pólya ensemble with weight ω, x is an m×m Hermitian matrix of rank n₂
(fixed spectrum ``a`` or drawn from a polynomial ensemble), and the product
has rank r = min(n₁, n₂).

Everything is built from the *reduced weight* (k = m − n₁)

    R(u) = ∫_u^∞ (dy/y) k (1 − u/y)^{k−1} ω(y),      R = ω for k = 0,

whose Mellin transform is k! Γ(s)/Γ(s+k) · Mω(s), and from the two
transition weights

    ω̃_≥(ã|a) = Θ(ãa) (ã/a)^{n₁−n₂} R(ã/a)/|a|      (n₁ ≥ n₂),
    ω̃_<(ã|a) = Θ(ãa) a^{n₂−n₁}     R(ã/a)/|a|      (n₁ ≤ n₂).

Both rank branches are selected explicitly through ``ProductSpec.branch``;
at n₁ = n₂ the two code paths describe the same law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import gammaln, loggamma

from .ensembles import PolyaWeight, PolynomialEnsembleH
from .numerics import decay_radius, laurent_coefficients, line_rule, log_rule, vandermonde

__all__ = [
    "FixedSpectrum",
    "ProductSpec",
    "ReducedWeight",
    "reduced_weight",
    "weight_tilde_geq",
    "weight_tilde_less",
    "elementary_sym",
    "elementary_orthogonality",
    "BiorthSystem",
    "Kernel",
    "jpdf_fixed",
    "biorth_fixed",
    "kernel_fixed",
    "jpdf_random",
    "ensemble_biorth",
    "chi_coefficients",
    "chi_polynomials",
    "transform_biorth",
    "transform_kernel",
    "correlation",
    "level_density",
    "spectrum_extent",
    "spectrum_rule",
    "jpdf_normalization",
    "projection_closed_forms",
    "inclusion_closed_forms",
]

BRANCHES = ("geq", "less")
DEGENERATE_TOL = 1e-6
_FAN = (4e-3, 2e-3, 1e-3, 5e-4)


# ---------------------------------------------------------------------------
# specification

@dataclass(frozen=True)
class FixedSpectrum:
    """Non-zero eigenvalues of a fixed Hermitian factor."""

    values: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) == 0 or not np.all(np.isfinite(v)) or np.any(v == 0):
            raise ValueError("fixed spectrum must be a non-empty vector of finite non-zero reals")
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values)


@dataclass(frozen=True)
class ProductSpec:
    """Shape data (l, m, n₁, n₂), the Pólya weight and the Hermitian factor.

    ``branch`` must be given explicitly: "geq" needs n₁ ≥ n₂ and "less"
    needs n₁ ≤ n₂.  ``x_side`` is a :class:`FixedSpectrum` (length n₂) or a
    rank-n₂ :class:`~polyaprod.ensembles.PolynomialEnsembleH`.
    """

    l: int
    m: int
    n1: int
    n2: int
    weight: PolyaWeight
    x_side: Union[FixedSpectrum, PolynomialEnsembleH]
    branch: str

    def __post_init__(self):
        l, m, n1, n2 = self.l, self.m, self.n1, self.n2
        if min(l, m, n1, n2) < 1:
            raise ValueError("all dimensions must be >= 1")
        if n1 > min(l, m):
            raise ValueError("rank n1 must not exceed min(l, m)")
        if n2 > m:
            raise ValueError("rank n2 must not exceed m")
        if self.branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}")
        if self.branch == "geq" and n1 < n2:
            raise ValueError("branch 'geq' needs n1 >= n2")
        if self.branch == "less" and n1 > n2:
            raise ValueError("branch 'less' needs n1 <= n2")
        if isinstance(self.x_side, FixedSpectrum):
            if len(self.x_side.values) != n2:
                raise ValueError("fixed spectrum length must equal n2")
        elif isinstance(self.x_side, PolynomialEnsembleH):
            if self.x_side.n != n2:
                raise ValueError("ensemble rank must equal n2")
        else:
            raise TypeError("x_side must be FixedSpectrum or PolynomialEnsembleH")

    @property
    def r(self) -> int:
        return min(self.n1, self.n2)

    @property
    def k(self) -> int:
        return self.m - self.n1

    @property
    def d(self) -> int:
        """n₂ − n₁ (≥ 0 in the 'less' branch)."""
        return self.n2 - self.n1

    @property
    def exponent(self) -> int:
        """Power of u in the ω̃ integrals: n₁ − n₂ ('geq') or n₂ − n₁ ('less')."""
        return self.n1 - self.n2 if self.branch == "geq" else self.n2 - self.n1

    @property
    def fixed(self) -> bool:
        return isinstance(self.x_side, FixedSpectrum)

    def with_x(self, x_side) -> "ProductSpec":
        return ProductSpec(self.l, self.m, self.n1, self.n2, self.weight, x_side, self.branch)


# ---------------------------------------------------------------------------
# reduced weight

class ReducedWeight:
    """R(u) for a weight ω and projection depth k (see module docstring).

    Pointwise values are computed by a graded Gauss rule in ln y and cached;
    projection weights with α = k use the exact Beta-convolution closed form,
    and a Dirac ω with k = 0 is kept symbolic (``dirac``).
    """

    def __init__(self, weight: PolyaWeight, k: int, panel_width: float = 0.5, order: int = 16):
        if k < 0:
            raise ValueError("k must be non-negative")
        self.weight, self.k = weight, k
        self.panel_width, self.order = panel_width, order
        self.dirac = weight.distributional and k == 0
        self._cache: dict = {}
        if weight.upper < math.inf or (weight.distributional and k > 0):
            self.upper = 1.0
        else:
            # cut where y^p ω(y) is negligible so that the low moments used by
            # the bi-orthonormal functions are not truncated (power tails)
            p = 3.0
            if weight.kind == "cauchy-lorentz":
                p = max(0.0, min(p, weight._gamma - weight.nu - 0.5))
            self.upper = decay_radius(lambda y: y**p * weight(y), tiny=1e-17, limit=1e30)
        self.breakpoints = (1.0,) if self.upper == 1.0 else ()
        self._rule = None

    # -- closed forms -------------------------------------------------------
    def _closed_form(self, u: np.ndarray):
        w, k = self.weight, self.k
        if w.distributional:  # k >= 1: δ(y − 1) gives k(1 − u)^{k−1}
            return np.where((u > 0) & (u < 1), k * np.clip(1 - u, 0, None) ** (k - 1), 0.0)
        if k == 0:
            return np.asarray(w(u), dtype=float)
        if w.kind == "projection" and round(w.alpha) == k:
            B = k + w.beta
            c = math.exp(math.lgamma(k + 1) + math.lgamma(w.beta + 1) - math.lgamma(B + 1))
            return np.where((u > 0) & (u < 1), c * B * np.clip(1 - u, 0, None) ** (B - 1), 0.0)
        return None

    def _quadrature(self, u: float) -> float:
        if u >= self.upper:
            return 0.0
        y, wt = log_rule(u, self.upper, breakpoints=self.breakpoints, panel_width=self.panel_width,
                         order=self.order)
        k = self.k
        vals = np.asarray(self.weight(y)) * k * (1.0 - u / y) ** (k - 1) / y
        return float(np.dot(wt, vals))

    def __call__(self, u) -> np.ndarray:
        if self.dirac:
            raise ValueError("reduced weight is a Dirac distribution at u = 1")
        u = np.asarray(u, dtype=float)
        closed = self._closed_form(u)
        if closed is not None:
            return closed
        flat = u.ravel()
        out = np.zeros(flat.shape)
        uniq, inv = np.unique(flat, return_inverse=True)
        vals = np.empty(len(uniq))
        for i, x in enumerate(uniq):
            if x <= 0:
                vals[i] = 0.0
                continue
            hit = self._cache.get(x)
            if hit is None:
                hit = self._quadrature(float(x))
                if len(self._cache) < 200000:
                    self._cache[x] = hit
            vals[i] = hit
        out[:] = vals[inv]
        return out.reshape(u.shape)

    def mellin(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=complex)
        k = self.k
        factor = np.exp(gammaln(k + 1) + loggamma(s) - loggamma(s + k)) if k else 1.0
        return factor * self.weight.mellin(s)

    # -- convolution rule --------------------------------------------------------
    def rule(self, lo: float = 1e-14):
        """Nodes u and weights for ∫₀^∞ du/u F(u) R(u) (R already folded in)."""
        if self.dirac:
            return np.array([1.0]), np.array([1.0])
        if self._rule is None:
            u, w = log_rule(lo, self.upper, breakpoints=self.breakpoints, panel_width=0.25, order=16)
            self._rule = (u, w * self(u) / u)
        return self._rule

    def convolve(self, f: Callable[[np.ndarray], np.ndarray], x, exponent: int = 0) -> np.ndarray:
        """∫₀^∞ du/u u^exponent R(u) f(x/u) for every entry of ``x``."""
        x = np.asarray(x)
        u, w = self.rule()
        ww = w * u ** float(exponent)
        vals = np.asarray(f(x[..., None] / u))
        return np.tensordot(vals, ww, axes=([-1], [0]))


@lru_cache(maxsize=64)
def reduced_weight(weight: PolyaWeight, k: int) -> ReducedWeight:
    """Cached :class:`ReducedWeight` for (ω, k)."""
    return ReducedWeight(weight, k)


# ---------------------------------------------------------------------------
# transition weights

def _tilde(spec: ProductSpec, at, a_c, geq: bool) -> np.ndarray:
    R = reduced_weight(spec.weight, spec.k)
    at = np.asarray(at, dtype=float)
    a_c = np.asarray(a_c, dtype=float)
    if np.any(a_c == 0):
        raise ValueError("a_c must be non-zero")
    u = at / a_c
    pos = u > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        uu = np.where(pos, u, 1.0)
        core = np.where(pos, R(uu), 0.0)
        if geq:
            core = core * uu ** float(spec.n1 - spec.n2)
        else:
            core = core * a_c ** float(spec.n2 - spec.n1)
    return core / np.abs(a_c)


def _check_pointwise(spec: ProductSpec):
    if reduced_weight(spec.weight, spec.k).dirac:
        raise ValueError("the transition weight is a Dirac distribution (m = n1 with a distributional "
                         "weight); only integrals against it are available")


def weight_tilde_geq(spec: ProductSpec, at, a_c) -> np.ndarray:
    """ω̃_≥(ã|a) = Θ(ãa)(ã/a)^{n₁−n₂} R(ã/a)/|a|; needs n₁ ≥ n₂."""
    if spec.n1 < spec.n2:
        raise ValueError("weight_tilde_geq needs n1 >= n2")
    _check_pointwise(spec)
    return _tilde(spec, at, a_c, True)


def weight_tilde_less(spec: ProductSpec, at, a_c) -> np.ndarray:
    """ω̃_<(ã|a) = Θ(ãa) a^{n₂−n₁} R(ã/a)/|a|; needs n₁ ≤ n₂."""
    if spec.n1 > spec.n2:
        raise ValueError("weight_tilde_less needs n1 <= n2")
    _check_pointwise(spec)
    return _tilde(spec, at, a_c, False)


def _branch_tilde(spec, at, a_c):
    return _tilde(spec, at, a_c, spec.branch == "geq")


# ---------------------------------------------------------------------------
# elementary symmetric polynomials

def elementary_sym(values, order: int, method: str = "contour") -> float:
    """e_order(−values): coefficient of z^{N−order} in ∏(z − values_i).

    ``method="contour"`` extracts it by a trapezoid contour integral (exact
    up to rounding); ``"newton"`` uses the product expansion as cross-check.
    """
    v = np.asarray(values, dtype=float).ravel()
    N = len(v)
    if order < 0 or order > N:
        raise ValueError("order must lie in 0..len(values)")
    if order == 0:
        return 1.0
    if method == "newton":
        return float(np.poly(v)[order]) if N else 1.0
    # e_k(v) = r^k e_k(v / r): the unit circle then never under- or overflows
    scale = float(np.max(np.abs(v))) or 1.0
    u = v / scale
    pts = max(8, 2 * (N + 2))
    coef = laurent_coefficients(lambda z: np.prod(z[:, None] - u[None, :], axis=1), [N - order], 1.0, pts)
    return float(coef[0].real) * scale**order


def _inverse_vandermonde(a: np.ndarray) -> np.ndarray:
    """E[j, c] = e_{n−j−1}(−a_{≠c}) / ∏_{h≠c}(a_c − a_h), so that E·[a_c^b] = 1."""
    n = len(a)
    E = np.empty((n, n))
    for c in range(n):
        rest = np.delete(a, c)
        den = np.prod(a[c] - rest)
        coeffs = np.poly(rest) if n > 1 else np.array([1.0])
        for j in range(n):
            E[j, c] = coeffs[n - j - 1] / den
    return E


def elementary_orthogonality(a) -> np.ndarray:
    """Matrix Σ_c a_c^{b} e_{n−b′−1}(−a_{≠c})/∏_{h≠c}(a_c − a_h) (b, b′ zero-based).

    Equals the identity for distinct ``a``; each entry uses the contour
    evaluation of :func:`elementary_sym`.
    """
    a = np.asarray(a, dtype=float)
    n = len(a)
    out = np.zeros((n, n))
    for c in range(n):
        rest = np.delete(a, c)
        den = np.prod(a[c] - rest)
        for bp in range(n):
            e = elementary_sym(rest, n - bp - 1)
            for b in range(n):
                out[b, bp] += a[c] ** b * e / den
    return out


# ---------------------------------------------------------------------------
# prefactors and χ

def _mellin_real(weight: PolyaWeight, s: float) -> float:
    return float(np.real(weight.mellin(float(s))))


def _geq_coefficient(spec: ProductSpec, j: int) -> float:
    """(m+j−n₂)! / ((m−n₁)!(n₁+j−n₂)! Mω(n₁+j−n₂+1)); zero when n₁+j−n₂ < 0."""
    t = spec.n1 + j - spec.n2
    if t < 0:
        return 0.0
    m, n1, n2 = spec.m, spec.n1, spec.n2
    log = math.lgamma(m + j - n2 + 1) - math.lgamma(m - n1 + 1) - math.lgamma(t + 1)
    return math.exp(log) / _mellin_real(spec.weight, t + 1)


def _less_coefficient(spec: ProductSpec, j: int) -> float:
    """(m+j−n₁)! / ((m−n₁)! j! Mω(j+1))."""
    m, n1 = spec.m, spec.n1
    log = math.lgamma(m + j - n1 + 1) - math.lgamma(m - n1 + 1) - math.lgamma(j + 1)
    return math.exp(log) / _mellin_real(spec.weight, j + 1)


def _jpdf_constant(spec: ProductSpec) -> float:
    """∏_{j=1}^{r} (m−j)! / ((m−n₁)!(n₁−j)! Mω(n₁−j+1))."""
    m, n1 = spec.m, spec.n1
    out = 0.0
    for j in range(1, spec.r + 1):
        out += math.lgamma(m - j + 1) - math.lgamma(m - n1 + 1) - math.lgamma(n1 - j + 1)
        out -= math.log(_mellin_real(spec.weight, n1 - j + 1))
    return math.exp(out)


def chi_coefficients(spec: ProductSpec, branch: Optional[str] = None, terms: Optional[int] = None) -> np.ndarray:
    """Ascending coefficients of χ_≥ or χ_< (``branch`` defaults to that of ``spec``).

    The finite sums have n₂ (χ_≥) or n₁ (χ_<) terms; ``terms`` extends the
    series when more moments exist.  χ_< starts at z^{n₂−n₁}, so its array
    has d leading zeros.
    """
    branch = branch or spec.branch
    if branch == "geq":
        n = spec.n2 if terms is None else terms
        return np.array([_geq_coefficient(spec, j) for j in range(n)])
    n = spec.n1 if terms is None else terms
    d = max(spec.d, 0)
    return np.concatenate([np.zeros(d), [_less_coefficient(spec, j) for j in range(n)]])


def chi_polynomials(spec: ProductSpec, z, extended: bool = False, max_terms: int = 200,
                    tail_tol: float = 1e-14):
    """(χ_≥(z), χ_<(z)).

    With ``extended=True`` the series are continued until a term drops
    below ``tail_tol`` relative to the partial sum (raises if it does not
    within ``max_terms``, i.e. z is outside the convergence disc).
    """
    z = np.asarray(z, dtype=complex)
    out = []
    for branch in BRANCHES:
        if not extended:
            c = chi_coefficients(spec, branch)
            out.append(np.polynomial.polynomial.polyval(z, c))
            continue
        total = np.zeros_like(z)
        d = max(spec.d, 0) if branch == "less" else 0
        for j in range(max_terms):
            coef = _geq_coefficient(spec, j) if branch == "geq" else _less_coefficient(spec, j)
            term = coef * z ** (j + d)
            total = total + term
            if j > 0 and np.all(np.abs(term) <= tail_tol * np.maximum(np.abs(total), 1e-300)):
                break
        else:
            raise ValueError("χ series did not converge; |z| outside the convergence disc")
        out.append(total)
    return tuple(complex(v) if v.ndim == 0 else v for v in out)


# ---------------------------------------------------------------------------
# bi-orthonormal systems and kernels

@dataclass
class BiorthSystem:
    """Polynomials p_j (ascending coefficient rows) and functions q_j.

    ``q(x)`` returns an array of shape (r,) + x.shape.
    """

    p_coeffs: np.ndarray
    q: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    @property
    def r(self) -> int:
        return self.p_coeffs.shape[0]

    def p(self, x) -> np.ndarray:
        x = np.asarray(x)
        powers = np.stack([x**h for h in range(self.p_coeffs.shape[1])], axis=0)
        return np.tensordot(self.p_coeffs, powers, axes=([1], [0]))

    def gram(self, nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """G[b, b′] = ∫ p_b q_{b′} by the supplied quadrature rule."""
        P = self.p(nodes) * weights
        Q = self.q(nodes)
        return np.real(P @ Q.T)

    def kernel(self) -> "Kernel":
        return Kernel(self.r, lambda x1, x2: np.sum(self.p(x1) * self.q(x2), axis=0), source=self)


@dataclass
class Kernel:
    """K_r(x₁, x₂) with broadcasting evaluator; ``source`` is the generating system."""

    r: int
    evaluate: Callable
    source: Optional[BiorthSystem] = None

    def __call__(self, x1, x2):
        return self.evaluate(np.asarray(x1), np.asarray(x2))

    def diagonal(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.real(self(x, x))


def correlation(kernel: Kernel, points, kappa: int) -> float:
    """κ-point correlation det[K(a_b, a_c)]_{b,c≤κ}."""
    pts = np.asarray(points, dtype=float).ravel()
    if kappa > kernel.r or kappa > len(pts):
        raise ValueError("kappa exceeds the kernel rank or the number of points")
    x = pts[:kappa]
    mat = np.real(kernel(x[:, None], x[None, :]))
    return float(np.linalg.det(np.atleast_2d(mat)))


def level_density(kernel: Kernel) -> Callable[[np.ndarray], np.ndarray]:
    """Normalised one-point density x ↦ K(x, x)/r."""
    return lambda x: kernel.diagonal(x) / kernel.r


# ---------------------------------------------------------------------------
# degenerate spectra: ε-fan + polynomial extrapolation

def _clusters(a: np.ndarray) -> list:
    scale = max(float(np.max(np.abs(a))), 1e-300)
    order = np.argsort(a)
    groups, cur = [], [order[0]]
    for i, j in zip(order[:-1], order[1:]):
        if a[j] - a[i] <= DEGENERATE_TOL * scale:
            cur.append(j)
        else:
            groups.append(cur)
            cur = [j]
    groups.append(cur)
    return groups


def _fan(a: np.ndarray):
    """Perturbed spectra and the extrapolation weights to ε = 0 (or None)."""
    groups = _clusters(a)
    if all(len(g) == 1 for g in groups):
        return None
    scale = float(np.max(np.abs(a)))
    a = a.copy()
    offsets = np.zeros(len(a))
    for g in groups:
        if len(g) > 1:
            base = a[g].mean()
            if abs(base) < len(g) * _FAN[0] * scale:
                raise ValueError("degenerate spectrum too close to zero for the ε-fan")
            a[g] = base
            offsets[g] = np.arange(len(g)) - 0.5 * (len(g) - 1)
    hs = np.asarray(_FAN)
    lag = np.array([np.prod([h2 / (h2 - h1) for h2 in hs if h2 != h1]) for h1 in hs])
    spectra = [a + h * scale * offsets for h in hs]
    return spectra, lag


def _combine(spec: ProductSpec, fn: Callable[[ProductSpec], object], mix: Callable):
    a = spec.x_side.array
    fan = _fan(a)
    if fan is None:
        return fn(spec)
    spectra, lag = fan
    parts = [fn(spec.with_x(FixedSpectrum(tuple(s)))) for s in spectra]
    return mix(parts, lag)


# ---------------------------------------------------------------------------
# fixed spectrum

def _require_fixed(spec: ProductSpec):
    if not spec.fixed:
        raise ValueError("this operation needs a fixed spectrum for x")
    _check_pointwise(spec)


def _fixed_family(spec: ProductSpec, x) -> np.ndarray:
    """The r functions F_j(x) whose determinant gives the JPDF, shape (r,) + x.shape."""
    a = spec.x_side.array
    x = np.asarray(x, dtype=float)
    W = np.stack([_branch_tilde(spec, x, ac) for ac in a], axis=0)  # (n2,) + x.shape
    if spec.branch == "geq":
        return W
    E = _inverse_vandermonde(a)[spec.d:]  # rows e_{n1−b}
    return np.tensordot(E, W, axes=([1], [0]))


def _fixed_prefactor(spec: ProductSpec) -> float:
    c = _jpdf_constant(spec) / math.factorial(spec.r)
    if spec.branch == "geq":
        c /= float(vandermonde(spec.x_side.array))
    return c


def _jpdf_fixed_plain(spec: ProductSpec, at: np.ndarray) -> np.ndarray:
    at2 = np.atleast_2d(at)
    uniq, inv = np.unique(at2, return_inverse=True)
    F = _fixed_family(spec, uniq)  # (r, U)
    mats = F[:, inv.reshape(at2.shape)]  # (r, N, r): [j, sample, point]
    mats = np.moveaxis(mats, 0, -1)  # (N, point, j)
    det = np.linalg.det(mats) if spec.r > 1 else mats[:, 0, 0]
    return _fixed_prefactor(spec) * vandermonde(at2) * det


def jpdf_fixed(spec: ProductSpec, at) -> np.ndarray:
    """Unordered JPDF of the r non-zero eigenvalues of g a g* at ``at``.

    ``at`` has shape (r,) or (N, r).  Degenerate fixed spectra are handled
    by an ε-fan and polynomial extrapolation.
    """
    _require_fixed(spec)
    at = np.asarray(at, dtype=float)
    single = at.ndim == 1
    if at.shape[-1] != spec.r:
        raise ValueError(f"need {spec.r} eigenvalues per point")
    out = _combine(spec, lambda s: _jpdf_fixed_plain(s, at), lambda parts, lag: sum(l * p for l, p in zip(lag, parts)))
    return out[0] if single else out


def _biorth_fixed_plain(spec: ProductSpec) -> BiorthSystem:
    a = spec.x_side.array
    r = spec.r
    E = _inverse_vandermonde(a)
    if spec.branch == "geq":
        rows = E
        pref = np.array([_geq_coefficient(spec, j) for j in range(r)])
    else:
        rows = E[spec.d:]
        pref = np.array([_less_coefficient(spec, j) for j in range(r)])
    coef = pref[:, None] * rows  # (r, n2)

    def q(x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        W = np.stack([_branch_tilde(spec, uniq, ac) for ac in a], axis=0)
        return (coef @ W)[:, inv].reshape((r,) + x.shape)

    return BiorthSystem(np.eye(r), q, label="fixed")


def biorth_fixed(spec: ProductSpec) -> BiorthSystem:
    """p_j(ã) = ãʲ and the matching q_j (both branches)."""
    _require_fixed(spec)

    def mix(parts, lag):
        return BiorthSystem(np.eye(spec.r), lambda x: sum(l * p.q(x) for l, p in zip(lag, parts)), "fixed")

    return _combine(spec, _biorth_fixed_plain, mix)


def kernel_fixed(spec: ProductSpec) -> Kernel:
    """K_r(ã₁, ã₂) = Σ_j ã₁ʲ q_j(ã₂)."""
    return biorth_fixed(spec).kernel()


# ---------------------------------------------------------------------------
# quadrature rules on the spectrum line

def spectrum_extent(spec: ProductSpec, lo_rel: float = 1e-10) -> dict:
    """Radial extent of the product eigenvalues: lo, hi, sides and breakpoints.

    For a fixed spectrum the signs present in ``a`` are used, with
    breakpoints at |a_c| for compact weights; for an ensemble the support
    sides of the ensemble and a radius probed from its weights.
    """
    R = reduced_weight(spec.weight, spec.k)
    if spec.fixed:
        a = np.abs(spec.x_side.array)
        sides = tuple(sorted({int(np.sign(v)) for v in spec.x_side.array}))
        return dict(hi=R.upper * a.max(), lo=lo_rel * a.min(), sides=sides,
                    breakpoints=tuple(a * R.upper) if R.breakpoints else ())
    ens = spec.x_side
    sides = {"positive": (1,), "negative": (-1,)}.get(ens.support, (-1, 1))
    return dict(hi=R.upper * _ensemble_radius(ens), lo=lo_rel, sides=sides, breakpoints=())


def spectrum_rule(spec: ProductSpec, lo_rel: float = 1e-10, panel_width: float = 0.25, order: int = 16):
    """1-D Gauss rule (nodes, weights) covering the support of the product eigenvalues."""
    ext = spectrum_extent(spec, lo_rel)
    return line_rule(ext["hi"], lo=ext["lo"], breakpoints=ext["breakpoints"], sides=ext["sides"],
                     panel_width=panel_width, order=order)


def _ensemble_radius(ens: PolynomialEnsembleH) -> float:
    def env(y):
        y = np.asarray(y, dtype=float)
        return sum(np.abs(np.asarray(w(y))) + np.abs(np.asarray(w(-y))) for w in ens.weights)

    return decay_radius(env, tiny=1e-18)


def jpdf_normalization(spec: ProductSpec, density: Optional[Callable] = None, **rule_kw) -> float:
    """∫ p(ã) dã over ℝ^r by a tensor rule (r ≤ 2).

    Without ``density`` the determinantal structure p = c·Δ(ã)·det[F_j(ã_i)]
    is used so the one-dimensional functions F_j are evaluated only once on
    the rule nodes; the tensor sum itself is carried out in full.
    """
    if spec.r > 2:
        raise ValueError("tensor normalisation is implemented for r <= 2")
    x, w = spectrum_rule(spec, **rule_kw)
    if density is None and spec.fixed and _fan(spec.x_side.array) is not None:
        density = lambda t: jpdf_fixed(spec, t)  # noqa: E731
    if density is not None:
        if spec.r == 1:
            return float(np.dot(w, density(x[:, None])))
        total = 0.0
        block = max(1, 200000 // len(x))
        for i in range(0, len(x), block):
            xi = x[i:i + block]
            grid = np.stack(np.broadcast_arrays(xi[:, None], x[None, :]), axis=-1).reshape(-1, 2)
            total += float(w[i:i + block] @ density(grid).reshape(len(xi), len(x)) @ w)
        return total
    const, F = _family(spec, x)
    if spec.r == 1:
        return float(const * np.dot(w, F[0]))
    total = 0.0
    block = max(1, 2000000 // len(x))
    for i in range(0, len(x), block):
        sl = slice(i, i + block)
        det = np.outer(F[0, sl], F[1]) - np.outer(F[1, sl], F[0])
        vdm = x[None, :] - x[sl, None]
        total += float(w[sl] @ (vdm * det) @ w)
    return const * total


def _family(spec: ProductSpec, x: np.ndarray, form: str = "biorth", source: Optional[BiorthSystem] = None):
    """(c, F) with p(ã) = c Δ(ã) det[F_j(ã_i)], F of shape (r, len(x))."""
    const = _jpdf_constant(spec) / math.factorial(spec.r)
    if spec.fixed:
        _require_fixed(spec)
        if spec.branch == "geq":
            const /= float(vandermonde(spec.x_side.array))
        return const, _fixed_family(spec, x)
    if form != "biorth":
        raise ValueError("the one-dimensional family exists for the bi-orthonormal form only")
    bs = source or ensemble_biorth(spec.x_side)
    d = max(spec.d, 0)
    idx = list(range(spec.n2)) if spec.branch == "geq" else list(range(d, spec.n2))
    F = np.stack([_omega_integral(spec, lambda a, j=j: bs.q(a)[j], x) for j in idx], axis=0)
    return const * _leading_factor(bs.p_coeffs, idx), F


# ---------------------------------------------------------------------------
# random x from a polynomial ensemble

def ensemble_biorth(ens: PolynomialEnsembleH) -> BiorthSystem:
    """Bi-orthonormal system of a Hermitian polynomial ensemble."""
    ps, qs = ens.biorthogonal()
    width = max(len(p) for p in ps)
    P = np.zeros((ens.n, width))
    for j, p in enumerate(ps):
        P[j, : len(p)] = p

    def q(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.asarray(f(x), dtype=float) * np.ones(x.shape) for f in qs], axis=0)

    return BiorthSystem(P, q, label=ens.label)


def _omega_integral(spec: ProductSpec, f: Callable, x) -> np.ndarray:
    """∫ da ω̃(x|a) f(a) on the branch of ``spec``, vectorised in x."""
    R = reduced_weight(spec.weight, spec.k)
    x = np.asarray(x, dtype=float)
    if spec.branch == "geq":
        return R.convolve(f, x, spec.n1 - spec.n2)
    d = spec.d
    with np.errstate(divide="ignore", invalid="ignore"):
        return x**d * R.convolve(f, x, -d)


def _leading_factor(P: np.ndarray, rows) -> float:
    """∏ of the leading coefficients of p_j, j ∈ rows (1 for monic systems)."""
    out = 1.0
    for j in rows:
        out *= P[j, j]
    return out


def jpdf_random(spec: ProductSpec, at, form: str = "biorth", source: Optional[BiorthSystem] = None) -> np.ndarray:
    """JPDF of the product eigenvalues when x is drawn from a polynomial ensemble.

    ``form="mellin"`` uses the ratio of the ω̃-weight determinant and the
    Mellin moment determinant of the ensemble weights; ``form="biorth"``
    uses the ensemble's bi-orthonormal q_j instead (source system optional).
    """
    if spec.fixed:
        raise ValueError("jpdf_random needs an ensemble for x")
    ens = spec.x_side
    at = np.asarray(at, dtype=float)
    single = at.ndim == 1
    at2 = np.atleast_2d(at)
    r, n2, d = spec.r, spec.n2, max(spec.d, 0)
    if at2.shape[1] != r:
        raise ValueError(f"need {r} eigenvalues per point")
    uniq, inv = np.unique(at2, return_inverse=True)
    inv = inv.reshape(at2.shape)
    const = _jpdf_constant(spec) / math.factorial(r)
    vdm = vandermonde(at2)
    if form == "biorth":
        c, F = _family(spec, uniq, "biorth", source)
        mats = np.moveaxis(F[:, inv], 0, -1)
        out = c * vdm * np.linalg.det(mats)
    elif form == "mellin":
        F = np.stack([_omega_integral(spec, w, uniq) for w in ens.weights], axis=0)  # (n2, U)
        den = np.linalg.det(np.real(ens.moment_matrix()))
        N = at2.shape[0]
        mats = np.empty((N, n2, n2))
        for b in range(d):
            for c in range(n2):
                mats[:, b, c] = np.real(ens.mellin(c + 1, np.array([b + 1.0]), b % 2)[0])
        mats[:, d:, :] = np.moveaxis(F[:, inv], 0, -1)
        out = const * vdm * np.linalg.det(mats) / den
    else:
        raise ValueError("form must be 'biorth' or 'mellin'")
    return out[0] if single else out


# ---------------------------------------------------------------------------
# transformation of bi-orthonormal systems and kernels

def _chi_laurent(spec: ProductSpec, degrees, radius: float) -> np.ndarray:
    c = chi_coefficients(spec)
    return np.real(laurent_coefficients(lambda z: np.polynomial.polynomial.polyval(z, c), degrees, radius,
                                        points=max(16, 4 * len(c))))


def transform_biorth(spec: ProductSpec, source: Optional[BiorthSystem] = None, radius: float = 1.0,
                     check_tol: float = 1e-10) -> BiorthSystem:
    """Bi-orthonormal system of g x g* from that of x.

    p̃_j picks Laurent coefficients of χ (extracted on two contour radii as
    a stability check) and q̃_j = ∫ da ω̃(ã|a) q_j(a) (with q_{n₂−n₁+j} in
    the 'less' branch).
    """
    if source is None:
        if spec.fixed:
            raise ValueError("transform_biorth needs an ensemble x or an explicit source system")
        source = ensemble_biorth(spec.x_side)
    if source.r != spec.n2:
        raise ValueError("source system must have n2 members")
    r, d = spec.r, max(spec.d, 0)
    P = source.p_coeffs
    deg = P.shape[1]
    chi_len = len(chi_coefficients(spec))
    degrees = range(max(deg, chi_len))
    c1 = _chi_laurent(spec, degrees, radius)
    c2 = _chi_laurent(spec, degrees, 2.0 * radius)
    if not np.allclose(c1, c2, rtol=check_tol, atol=check_tol * max(1.0, np.max(np.abs(c1)))):
        raise ValueError("χ coefficients unstable across contour radii; adjust the radius")
    chi = c1
    if spec.branch == "geq":
        rows = list(range(r))
        newP = P[:r, :] * chi[None, :deg]
    else:
        rows = list(range(d, spec.n2))
        newP = np.zeros((r, max(deg - d, 1)))
        for j, src in enumerate(rows):
            for k in range(deg - d):
                newP[j, k] = P[src, k + d] * chi[k + d]

    def q(x):
        x = np.asarray(x, dtype=float)
        return np.stack([_omega_integral(spec, lambda a, j=j: source.q(a)[j], x) for j in rows], axis=0)

    return BiorthSystem(newP, q, label="transformed")


def transform_kernel(spec: ProductSpec, source: Optional[Kernel] = None, radius: Optional[float] = None,
                     points: int = 256) -> Kernel:
    """Kernel of g x g* as a contour × half-line integral of the kernel of x.

    K̃(x₁,x₂) = ∮ dz/(2πiz) χ(z) ∫ du/u u^{n₁−n₂} R(u) K(x₁/z, x₂/u) ('geq'),
    with the (x₂/x₁)^{n₂−n₁} prefactor and u^{−(n₂−n₁)} in the 'less'
    branch.  The contour radius defaults to |x₁| (the scale of the points
    entering the contour) and the source kernel must accept complex first
    arguments.
    """
    if source is None:
        if spec.fixed:
            raise ValueError("transform_kernel needs an ensemble x or an explicit source kernel")
        source = ensemble_biorth(spec.x_side).kernel()
    chi = chi_coefficients(spec)
    R = reduced_weight(spec.weight, spec.k)
    u, w = R.rule()
    geq = spec.branch == "geq"
    e = spec.n1 - spec.n2 if geq else -spec.d
    ww = w * u ** float(e)
    n = points

    def one(x1: float, x2: float) -> float:
        rad = radius if radius is not None else (abs(x1) if x1 != 0 else 1.0)
        z = rad * np.exp(2j * np.pi * np.arange(n) / n)
        chiz = np.polynomial.polynomial.polyval(z, chi)
        K = np.asarray(source((x1 / z)[:, None], (x2 / u)[None, :]))  # (n, U)
        val = np.mean(chiz * (K @ ww))
        if not geq:
            val *= (x2 / x1) ** spec.d
        return float(np.real(val))

    def evaluate(x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        out = np.empty(x1.shape)
        for idx in np.ndindex(x1.shape):
            out[idx] = one(float(x1[idx]), float(x2[idx]))
        return out

    return Kernel(spec.r, evaluate)


# ---------------------------------------------------------------------------
# projections and inclusions in closed form

@dataclass(frozen=True)
class ClosedForms:
    """Transition weight (callable (ã, a)) and χ coefficients in closed form."""

    weight_tilde: Callable
    chi: np.ndarray
    branch: str


def _beta_weight(alpha: float, beta: int, u):
    u = np.asarray(u, dtype=float)
    if beta == 0:
        raise ValueError("β = 0 is a Dirac distribution")
    inside = (u > 0) & (u < 1)
    uu = np.where(inside, u, 0.5)
    return np.where(inside, beta * uu**alpha * (1 - uu) ** (beta - 1), 0.0)


def projection_closed_forms(l: int, m: int, M: int, n2: int) -> ClosedForms:
    """Orthogonal projection: g an l×m block (l ≤ m) of a Haar unitary of size M.

    'geq' (l ≥ n₂):  ω̃ = (m−l)!(M−m)!/(M−l)! Θ(ãa)/|a| ω^{(l−n₂)}_{M−l}(ã/a);
    'less' (l < n₂): the same with ω^{(0)}_{M−l} — this is the core form
    ω̃_<(ã/a|1)/|a|, i.e. the generic ω̃_< divided by a^{n₂−l}.
    """
    if not (l <= m <= M and n2 <= m):
        raise ValueError("projection needs l <= m <= M and n2 <= m")
    c = math.exp(math.lgamma(m - l + 1) + math.lgamma(M - m + 1) - math.lgamma(M - l + 1))
    if l >= n2:
        alpha, branch = l - n2, "geq"
        chi = np.array([math.exp(math.lgamma(M + j - n2 + 1) - math.lgamma(m - l + 1) - math.lgamma(l + j - n2 + 1)
                                 - math.lgamma(M - m + 1)) for j in range(n2)])
    else:
        alpha, branch = 0, "less"
        chi = np.concatenate([np.zeros(n2 - l), [math.exp(math.lgamma(M - l + j + 1) - math.lgamma(m - l + 1)
                                                          - math.lgamma(j + 1) - math.lgamma(M - m + 1))
                                                 for j in range(l)]])

    def wt(at, a):
        at, a = np.asarray(at, dtype=float), np.asarray(a, dtype=float)
        u = at / a
        return c * np.where(u > 0, _beta_weight(alpha, M - l, np.where(u > 0, u, 0.5)), 0.0) / np.abs(a)

    return ClosedForms(wt, chi, branch)


def inclusion_closed_forms(l: int, m: int, M: int, n2: int) -> ClosedForms:
    """Inclusion: g an l×m block (l ≥ m) of a Haar unitary of size M > l, n₁ = m.

    ω̃_≥ = Θ(ãa)/|a| (ã/a)^{m−n₂} ω^{(l−m)}_{M−l}(ã/a) and
    χ_j = (M+j−n₂)!/((M−l)!(l+j−n₂)!), valid for every n₂ ≤ m.
    """
    if not (m <= l < M and n2 <= m):
        raise ValueError("inclusion closed form needs m <= l < M and n2 <= m")
    chi = np.array([math.exp(math.lgamma(M + j - n2 + 1) - math.lgamma(M - l + 1) - math.lgamma(l + j - n2 + 1))
                    for j in range(n2)])

    def wt(at, a):
        at, a = np.asarray(at, dtype=float), np.asarray(a, dtype=float)
        u = at / a
        uu = np.where(u > 0, u, 0.5)
        return np.where(u > 0, uu ** (m - n2) * _beta_weight(l - m, M - l, uu), 0.0) / np.abs(a)

    return ClosedForms(wt, chi, "geq")
