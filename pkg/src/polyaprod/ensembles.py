"""Pólya weights, polynomial ensembles and their spherical transforms.

A Pólya ensemble of rank n on complex l×m matrices has squared singular
values distributed as

    p(a) = Δₙ(a) det[(−a_c ∂_c)^{b−1} ω(a_c)] / ∏_{j=1}^{n} j! Mω(j),

normalised as an unordered density on (0, ∞)ⁿ.  The catalog below carries,
for each weight, a pointwise evaluator, the closed-form Mellin transform,
exact operator powers (−a∂)^k ω written as polynomial × base function, and
(where a matrix model exists) an exact sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import hermite_e as herm
from numpy.polynomial import polynomial as npoly
from scipy.special import gammaln, loggamma

from .mellin import UnivariateFunction, mellin_half_line
from .numerics import complex_gaussian, haar_unitary, make_rng, vandermonde

__all__ = [
    "WEIGHT_KINDS",
    "PolyaWeight",
    "make_weight",
    "polya_derivative",
    "polya_jpdf",
    "spherical_transform_polya",
    "PolynomialEnsembleG",
    "PolynomialEnsembleH",
    "spherical_transform_polynomial",
    "gue_ensemble",
    "wishart_ensemble",
    "PolyaFrequencyReport",
    "polya_frequency_check",
    "MeasureConstant",
    "eigen_measure_constant",
    "identification_factor",
    "sample_ensemble_matrix",
    "sample_polya_matrix",
]

WEIGHT_KINDS = ("ginibre", "jacobi", "cauchy-lorentz", "muttalib-borodin", "lognormal", "projection", "dirac-unit")
_UNLIMITED = 64


def _is_int(x: float) -> bool:
    return abs(x - round(x)) < 1e-12


@dataclass(frozen=True)
class PolyaWeight:
    """Univariate Pólya weight ω on (0, ∞).

    Parameters are only meaningful for the kinds that use them:
    ``nu`` (all but projection/dirac), ``mu`` and ``n`` (jacobi,
    cauchy-lorentz), ``theta`` (muttalib-borodin) and ``M, m, l``
    (projection).  Use :func:`make_weight` rather than the constructor.
    """

    kind: str
    nu: float = 0.0
    mu: float = 1.0
    theta: float = 1.0
    n: int = 1
    M: int = 0
    m: int = 0
    l: int = 0

    # -- projection parameters -------------------------------------------------
    @property
    def alpha(self) -> float:
        """Power of a: m − l for projections (l ≤ m), l − m for inclusions."""
        if self.kind == "projection":
            return float(abs(self.m - self.l))
        return self.nu

    @property
    def beta(self) -> int:
        """Width parameter: M − max(l, m); zero means a Dirac weight."""
        return self.M - max(self.l, self.m)

    @property
    def distributional(self) -> bool:
        return self.kind == "dirac-unit" or (self.kind == "projection" and self.beta == 0)

    @property
    def upper(self) -> float:
        return 1.0 if self.kind in ("jacobi", "projection", "dirac-unit") else math.inf

    @property
    def breakpoints(self) -> tuple:
        return (1.0,) if self.upper == 1.0 else ()

    @property
    def _gamma(self) -> float:
        """Exponent of (1 − a) (jacobi-type) or −(1 + a) (cauchy)."""
        if self.kind == "jacobi":
            return self.mu + self.n - 1
        if self.kind == "projection":
            return self.beta - 1.0
        if self.kind == "cauchy-lorentz":
            return self.mu + self.n
        return 0.0

    @property
    def operator_power(self) -> int:
        """Largest k for which (−a∂)^k ω is an ordinary function."""
        if self.distributional:
            return 0
        if self.kind in ("jacobi", "projection"):
            g = self._gamma
            return int(round(g)) if _is_int(g) else int(math.floor(g)) + 1
        return _UNLIMITED

    @property
    def sampleable(self) -> bool:
        if self.kind == "ginibre":
            return _is_int(self.nu) and self.nu >= 0
        if self.kind == "jacobi":
            return _is_int(self.nu) and _is_int(self.mu) and self.nu >= 0
        return self.kind in ("projection", "dirac-unit")

    # -- evaluation ----------------------------------------------------------
    def log_base(self, a, k: int = 0) -> np.ndarray:
        """log of the non-polynomial factor of (−a∂)^k ω (−inf off support)."""
        a = np.asarray(a, dtype=float)
        out = np.full(a.shape, -np.inf)
        pos = a > 0
        x = a[pos]
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "ginibre":
                v = self.nu * np.log(x) - x
            elif self.kind in ("jacobi", "projection"):
                inside = x < 1
                v = np.full(x.shape, -np.inf)
                xi = x[inside]
                pref = math.log(self.beta) if self.kind == "projection" else 0.0
                v[inside] = pref + self.alpha * np.log(xi) + (self._gamma - k) * np.log1p(-xi)
            elif self.kind == "cauchy-lorentz":
                v = self.nu * np.log(x) - (self._gamma + k) * np.log1p(x)
            elif self.kind == "muttalib-borodin":
                v = self.nu * np.log(x) - x**self.theta
            elif self.kind == "lognormal":
                lx = np.log(x)
                v = self.nu * lx - lx * lx
            else:
                raise ValueError(f"{self.kind} weight is a distribution and has no pointwise values")
        out[pos] = v
        return out

    def __call__(self, a) -> np.ndarray:
        return np.exp(self.log_base(a, 0))

    def _variable(self, a: np.ndarray) -> np.ndarray:
        """Argument of the derivative polynomials."""
        if self.kind == "muttalib-borodin":
            return np.where(a > 0, np.abs(a) ** self.theta, 0.0)
        if self.kind == "lognormal":
            return np.log(np.where(a > 0, a, 1.0))
        return a

    def derivative_polynomial(self, k: int) -> np.ndarray:
        """Coefficients (ascending) of P_k with (−a∂)^k ω = P_k · base_k."""
        if self.distributional:
            raise ValueError("distributional weight has no derivative polynomials")
        p = np.array([1.0])
        nu = self.alpha
        for j in range(k):
            dp = npoly.polyder(p) if len(p) > 1 else np.array([0.0])
            x = np.array([0.0, 1.0])
            if self.kind == "ginibre":
                nxt = npoly.polysub(npoly.polymul(x, p), nu * p)
                nxt = npoly.polysub(nxt, npoly.polymul(x, dp))
            elif self.kind in ("jacobi", "projection"):
                one_minus = np.array([1.0, -1.0])
                t1 = nu * npoly.polymul(one_minus, p)
                t2 = (self._gamma - j) * npoly.polymul(x, p)
                t3 = npoly.polymul(npoly.polymul(x, one_minus), dp)
                nxt = -npoly.polyadd(npoly.polysub(t1, t2), t3)
            elif self.kind == "cauchy-lorentz":
                one_plus = np.array([1.0, 1.0])
                t1 = nu * npoly.polymul(one_plus, p)
                t2 = (self._gamma + j) * npoly.polymul(x, p)
                t3 = npoly.polymul(npoly.polymul(x, one_plus), dp)
                nxt = -npoly.polyadd(npoly.polysub(t1, t2), t3)
            elif self.kind == "muttalib-borodin":
                th = self.theta
                nxt = npoly.polysub(th * npoly.polymul(x, p), nu * p)
                nxt = npoly.polysub(nxt, th * npoly.polymul(x, dp))
            elif self.kind == "lognormal":
                nxt = npoly.polysub(npoly.polymul(np.array([-nu, 2.0]), p), dp)
            else:  # pragma: no cover - guarded above
                raise ValueError(self.kind)
            p = np.atleast_1d(nxt)
        return p

    def derivative(self, k: int, a) -> np.ndarray:
        """(−a d/da)^k ω(a), exact."""
        if k > self.operator_power:
            raise ValueError(f"operator power {k} exceeds the available order {self.operator_power}")
        a = np.asarray(a, dtype=float)
        poly = npoly.polyval(self._variable(a), self.derivative_polynomial(k))
        return np.where(a > 0, poly * np.exp(self.log_base(a, k)), 0.0)

    def mellin(self, s) -> np.ndarray:
        """Closed-form Mω(s) = ∫₀^∞ a^{s−1} ω(a) da."""
        s = np.asarray(s, dtype=complex)
        nu = self.nu
        if self.kind == "ginibre":
            out = np.exp(loggamma(s + nu))
        elif self.kind == "jacobi":
            c = self.mu + self.n
            out = np.exp(loggamma(s + nu) + gammaln(c) - loggamma(s + nu + c))
        elif self.kind == "cauchy-lorentz":
            c = self.mu + self.n
            out = np.exp(loggamma(s + nu) + loggamma(c - s - nu) - gammaln(c))
        elif self.kind == "muttalib-borodin":
            out = np.exp(loggamma((s + nu) / self.theta)) / self.theta
        elif self.kind == "lognormal":
            out = math.sqrt(math.pi) * np.exp((s + nu) ** 2 / 4.0)
        elif self.kind == "projection":
            al, be = self.alpha, self.beta
            out = np.exp(gammaln(be + 1) + loggamma(s + al) - loggamma(s + al + be))
        else:
            out = np.ones_like(s)
        return out if out.ndim else complex(out)

    def as_function(self) -> UnivariateFunction:
        return UnivariateFunction(self.__call__, "positive", self.breakpoints, self.upper)

    def mellin_quadrature(self, s) -> complex:
        """Mω(s) by quadrature (cross-check of :meth:`mellin`)."""
        return mellin_half_line(self.as_function(), s)

    # -- sampling --------------------------------------------------------------
    def sample_squared_sv(self, n: int, size: int, rng) -> np.ndarray:
        """Squared singular values (size, n) of a rank-n Pólya ensemble, sorted."""
        rng = make_rng(rng)
        if not self.sampleable:
            raise ValueError(f"weight {self.kind} has no matrix sampler")
        if self.kind == "ginibre":
            h = complex_gaussian((size, n, n + int(round(self.nu))), rng)
            return np.linalg.eigvalsh(h @ np.conj(np.swapaxes(h, 1, 2)))
        if self.kind == "dirac-unit" or (self.kind == "projection" and self.beta == 0):
            return np.ones((size, n))
        if self.kind == "jacobi":
            if self.n != n:
                raise ValueError("jacobi sampler needs the weight rank n to match")
            al, width = int(round(self.nu)), n + int(round(self.nu)) + n + int(round(self.mu))
        else:
            al, width = int(round(self.alpha)), n + int(round(self.alpha)) + self.beta
        k = haar_unitary(width, rng, size=size)[:, :n, : n + al]
        return np.clip(np.linalg.eigvalsh(k @ np.conj(np.swapaxes(k, 1, 2))), 0.0, 1.0)


def make_weight(kind: str, nu: float = 0.0, mu: float = 1.0, theta: float = 1.0, n: int = 1,
                M: int | None = None, m: int | None = None, l: int | None = None) -> PolyaWeight:
    """Build a catalog weight, validating the parameter domain."""
    if kind not in WEIGHT_KINDS:
        raise ValueError(f"unknown weight kind {kind!r}; choose from {WEIGHT_KINDS}")
    if kind in ("ginibre", "jacobi", "cauchy-lorentz", "muttalib-borodin", "lognormal") and not nu > -1:
        raise ValueError("nu must exceed -1")
    if kind in ("jacobi", "cauchy-lorentz") and not mu > 0:
        raise ValueError("mu must be positive")
    if kind == "muttalib-borodin" and not theta > 0:
        raise ValueError("theta must be positive")
    if n < 1:
        raise ValueError("rank n must be >= 1")
    if kind == "projection":
        if M is None or m is None or l is None:
            raise ValueError("projection weight needs M, m and l")
        if not (1 <= l <= M and 1 <= m <= M):
            raise ValueError("projection weight needs l, m <= M")
        return PolyaWeight(kind, n=n, M=int(M), m=int(m), l=int(l))
    return PolyaWeight(kind, float(nu), float(mu), float(theta), int(n))


def polya_derivative(weight: PolyaWeight, k: int, a, allow_fallback: bool = False, step: float = 1e-4):
    """(−a∂)^k ω(a).

    Uses the exact recurrence when ``k`` is within the weight's operator
    power; otherwise, only if ``allow_fallback``, central differences in
    t = ln a with the given step (noticeably less accurate).
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if k <= weight.operator_power and not weight.distributional:
        return weight.derivative(k, a)
    if not allow_fallback:
        raise ValueError(f"(−a∂)^{k} not available for {weight.kind}; pass allow_fallback=True")
    a = np.asarray(a, dtype=float)

    def rec(j, x):
        if j == 0:
            return weight(x)
        return -(rec(j - 1, x * math.exp(step)) - rec(j - 1, x * math.exp(-step))) / (2 * step)

    return rec(k, a)


def _polya_log_norm(weight: PolyaWeight, n: int) -> float:
    out = 0.0
    for j in range(1, n + 1):
        mj = weight.mellin(float(j))
        out += math.lgamma(j + 1) + math.log(abs(mj))
    return out


def polya_jpdf(weight: PolyaWeight, n: int, a) -> np.ndarray:
    """Normalised unordered JPDF of a rank-n Pólya ensemble at spectra ``a``."""
    if weight.distributional or weight.operator_power < n - 1:
        raise ValueError("weight does not admit n-1 operator powers (distributional Pólya ensemble)")
    a = np.asarray(a, dtype=float)
    single = a.ndim == 1
    a2 = np.atleast_2d(a)
    if a2.shape[1] != n:
        raise ValueError("spectrum length must equal n")
    N = a2.shape[0]
    logs = np.stack([weight.log_base(a2, k) for k in range(n)], axis=1)  # (N, b, c)
    polys = np.stack([npoly.polyval(weight._variable(a2), weight.derivative_polynomial(k)) for k in range(n)],
                     axis=1)
    finite = np.all(np.isfinite(logs), axis=(1, 2))
    out = np.zeros(N)
    if np.any(finite):
        lg = logs[finite]
        shift = np.max(lg, axis=1, keepdims=True)
        mat = polys[finite] * np.exp(lg - shift)
        sign, logdet = np.linalg.slogdet(mat)
        dv = vandermonde(a2[finite])
        with np.errstate(divide="ignore"):
            logv = np.log(np.abs(dv))
        total = logdet + np.sum(shift[:, 0, :], axis=1) + logv - _polya_log_norm(weight, n)
        out[finite] = sign * np.sign(dv) * np.exp(total)
    return out[0] if single else out


def spherical_transform_polya(weight: PolyaWeight, n: int, s) -> complex:
    """∏_{j=1}^n Mω(s_j + 1) / Mω(n − j + 1)."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if len(s) != n:
        raise ValueError("need n frequencies")
    num = np.asarray(weight.mellin(s + 1.0))
    den = np.asarray(weight.mellin(np.arange(n, 0, -1).astype(float)))
    if not np.all(np.isfinite(num)):
        raise ZeroDivisionError("Mellin transform has a pole at the requested frequency")
    return complex(np.prod(num) / np.prod(den))


# ---------------------------------------------------------------------------
# polynomial ensembles

@dataclass(frozen=True)
class PolynomialEnsembleG:
    """Rank-n polynomial ensemble on complex rectangular matrices.

    ``mellin(b, s)`` returns Mw_b(s) for 1-based b (vectorised in s).
    """

    n: int
    weights: tuple
    mellin: Callable

    @classmethod
    def from_polya(cls, weight: PolyaWeight, n: int) -> "PolynomialEnsembleG":
        fns = tuple((lambda a, k=k: weight.derivative(k, a)) for k in range(n))
        return cls(n, fns, lambda b, s: np.asarray(s, dtype=complex) ** (b - 1) * weight.mellin(s))

    def normalization_matrix(self) -> np.ndarray:
        c = np.arange(1, self.n + 1, dtype=float)
        return np.array([np.asarray(self.mellin(b, c), dtype=complex) for b in range(1, self.n + 1)])

    def density(self, a) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=float))
        mat = np.stack([np.asarray(w(a)) for w in self.weights], axis=1)
        return np.real(vandermonde(a) * np.linalg.det(mat) / (math.factorial(self.n)
                                                                * np.linalg.det(self.normalization_matrix())))


@dataclass(frozen=True)
class PolynomialEnsembleH:
    """Rank-n polynomial ensemble on Hermitian matrices.

    ``weights`` are vectorised functions on ℝ; ``mellin(b, s, L)`` gives
    Mw_b(s, L) for 1-based b.  ``sampler(size, rng)`` (optional) draws
    eigenvalue vectors.  ``support`` is "full", "positive" or "negative".
    The optional ``p_coeffs``/``q_funcs`` give a known bi-orthonormal pair
    (p_j as ascending coefficients); otherwise it is built from moments.
    """

    n: int
    weights: tuple
    mellin: Callable
    support: str = "full"
    sampler: Optional[Callable] = None
    p_coeffs: Optional[tuple] = None
    q_funcs: Optional[tuple] = None
    label: str = "custom"

    def moment_matrix(self) -> np.ndarray:
        """G[b, c] = ∫ x^c w_b(x) dx = Mw_b(c+1, c mod 2), b, c zero-based."""
        n = self.n
        out = np.empty((n, n), dtype=complex)
        for b in range(n):
            for c in range(n):
                out[b, c] = self.mellin(b + 1, np.array([c + 1.0]), c % 2)[0]
        return out

    def density(self, a) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=float))
        mat = np.stack([np.asarray(w(a)) for w in self.weights], axis=1)
        norm = np.linalg.det(self.moment_matrix().T)
        return np.real(vandermonde(a) * np.linalg.det(mat) / (math.factorial(self.n) * norm))

    def biorthogonal(self):
        """(p coefficient rows, q functions) with ∫ p_i q_j = δ_ij."""
        if self.p_coeffs is not None and self.q_funcs is not None:
            return [np.asarray(p, dtype=float) for p in self.p_coeffs], list(self.q_funcs)
        G = np.real(self.moment_matrix())
        coef = np.linalg.inv(G).T  # q_j = Σ_b coef[j, b] w_b
        ps = [np.eye(self.n)[j] for j in range(self.n)]
        qs = [(lambda x, row=coef[j]: sum(row[b] * np.asarray(self.weights[b](x)) for b in range(self.n)))
              for j in range(self.n)]
        return ps, qs

    def sample(self, size: int, rng) -> np.ndarray:
        if self.sampler is None:
            raise ValueError("ensemble has no sampler")
        return self.sampler(size, make_rng(rng))


def gue_ensemble(n: int) -> PolynomialEnsembleH:
    """x = (A + A*)/2 with A having independent N(0,1) real and imaginary parts.

    Eigenvalue density ∝ Δ² e^{−Σa²/2}; bi-orthonormal pair He_j and
    He_j e^{−a²/2}/(√(2π) j!).
    """
    weights = tuple((lambda x, b=b: np.asarray(x, dtype=float) ** b * np.exp(-np.asarray(x, dtype=float) ** 2 / 2))
                    for b in range(n))

    def mel(b, s, L):
        s = np.asarray(s, dtype=complex)
        par = (L + b - 1) % 2
        if par == 1:
            return np.zeros_like(s)
        e = s + b - 1
        return 2.0 * np.exp(loggamma(e / 2) + (e / 2 - 1) * math.log(2.0))

    def sampler(size, rng):
        A = rng.standard_normal((size, n, n)) + 1j * rng.standard_normal((size, n, n))
        return np.linalg.eigvalsh((A + np.conj(np.swapaxes(A, 1, 2))) / 2)

    p_coeffs = tuple(tuple(herm.herme2poly(np.eye(n)[j])) for j in range(n))
    q_funcs = tuple((lambda x, j=j: herm.hermeval(np.asarray(x, dtype=float), np.eye(n)[j])
                     * np.exp(-np.asarray(x, dtype=float) ** 2 / 2) / (math.sqrt(2 * math.pi) * math.factorial(j)))
                    for j in range(n))
    return PolynomialEnsembleH(n, weights, mel, "full", sampler, p_coeffs, q_funcs, label=f"gue{n}")


def wishart_ensemble(n: int, nu: int = 0, sign: int = 1) -> PolynomialEnsembleH:
    """x = ±h h* with h an n×(n+ν) complex Gaussian (E|h_ij|² = 1).

    Eigenvalue density ∝ Δ² ∏|a|^ν e^{−|a|} on the half line of ``sign``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")

    def w(x, b):
        x = np.asarray(x, dtype=float)
        y = sign * x
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.where(y > 0, x**b * np.abs(x) ** nu * np.exp(-np.abs(x)), 0.0)
        return val

    weights = tuple((lambda x, b=b: w(x, b)) for b in range(n))

    def mel(b, s, L):
        s = np.asarray(s, dtype=complex)
        return float(sign) ** ((L + b - 1) % 2) * np.exp(loggamma(s + b - 1 + nu))

    def sampler(size, rng):
        h = complex_gaussian((size, n, n + nu), rng)
        ev = np.linalg.eigvalsh(h @ np.conj(np.swapaxes(h, 1, 2)))
        return np.sort(sign * ev, axis=1)

    return PolynomialEnsembleH(n, weights, mel, "positive" if sign > 0 else "negative", sampler,
                               label=f"wishart{'+' if sign > 0 else '-'}{n}")


def spherical_transform_polynomial(ens, s, L=None) -> complex:
    """Spherical transform of a polynomial ensemble from Mellin determinants.

    G-type: ∏j! det[Mw_b(s_c+1)] / (Δ(s) det[Mw_b(c)]);  H-type: the same
    with Mw_b(s_c+1, L_c) and Mw_b(c, c−1).
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    n = ens.n
    if len(s) != n:
        raise ValueError("need n frequencies")
    pref = math.prod(math.factorial(j) for j in range(n))
    if isinstance(ens, PolynomialEnsembleG):
        num = np.array([np.asarray(ens.mellin(b, s + 1.0), dtype=complex) for b in range(1, n + 1)])
        den = np.linalg.det(ens.normalization_matrix())
    else:
        if L is None:
            raise ValueError("H-type transform needs parities L")
        L = np.atleast_1d(np.asarray(L, dtype=int)) % 2
        num = np.array([[ens.mellin(b, np.array([s[c] + 1.0]), int(L[c]))[0] for c in range(n)]
                        for b in range(1, n + 1)])
        den = np.linalg.det(ens.moment_matrix())
    dv = vandermonde(s)
    if abs(dv) == 0 or abs(den) == 0:
        raise ZeroDivisionError("coincident frequencies or singular normalisation")
    return complex(pref * np.linalg.det(num) / (dv * den))


# ---------------------------------------------------------------------------
# Pólya-frequency check

@dataclass
class PolyaFrequencyReport:
    passed: bool
    worst_margin: float
    failing_order: Optional[int]
    margins: dict = field(default_factory=dict)
    skipped: bool = False


def _log_range(weight: PolyaWeight):
    t = np.linspace(-40, 40, 16001)
    with np.errstate(over="ignore"):
        lv = np.asarray(weight.log_base(np.exp(t)))
    finite = np.isfinite(lv)
    top = np.max(lv[finite])
    keep = t[finite & (lv > top - 30.0)]
    return float(keep.min()), float(keep.max())


def polya_frequency_check(weight, order: int, draws: int = 200, rng=0, tol: float = 1e-12) -> PolyaFrequencyReport:
    """Check Δ_j(x)Δ_j(y) det[f(x_b − y_c)] ≥ 0, f = ω∘exp, for j ≤ ``order``.

    ``weight`` may be a :class:`PolyaWeight` or any positive callable on
    (0, ∞).  The margin of each draw is divided by a Hadamard-type bound so
    that the tolerance −``tol`` is scale free.  Report-only: never raises.
    """
    rng = make_rng(rng)
    if isinstance(weight, PolyaWeight):
        if weight.distributional:
            return PolyaFrequencyReport(True, 0.0, None, {}, skipped=True)
        lo, hi = _log_range(weight)
        f = lambda t: weight(np.exp(t))  # noqa: E731
    else:
        lo, hi = -6.0, 6.0
        f = lambda t: np.asarray(weight(np.exp(t)), dtype=float)  # noqa: E731
    centre, width = 0.5 * (lo + hi), hi - lo
    worst = math.inf
    failing = None
    margins = {}
    for j in range(1, order + 1):
        w_j = math.inf
        for _ in range(draws):
            x = np.sort(centre + rng.uniform(-width / 2, width / 2, size=j))
            y = np.sort(rng.uniform(-width / 2, width / 2, size=j))
            mat = f(x[:, None] - y[None, :])
            bound = np.prod(np.linalg.norm(mat, axis=0))
            if bound == 0:
                continue
            val = vandermonde(x) * vandermonde(y) * np.linalg.det(mat)
            scale = abs(vandermonde(x) * vandermonde(y)) * bound
            w_j = min(w_j, float(val / scale))
        margins[j] = w_j
        worst = min(worst, w_j)
        if failing is None and w_j < -tol:
            failing = j
    return PolyaFrequencyReport(failing is None, worst, failing, margins)


# ---------------------------------------------------------------------------
# measure constants and matrix samplers

@dataclass(frozen=True)
class MeasureConstant:
    space: str
    n: int
    constant: float


def eigen_measure_constant(space: str, n: int) -> MeasureConstant:
    """Prefactor mapping a K-invariant matrix density to the spectral density.

    G-type: π^{n²}/n! ∏_{j<n} (j!)^{−2} (times Δ²(a)); H-type:
    (1/n!) ∏_{j<n} π^j/j! (times Δ²(a)).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lf = [math.lgamma(j + 1) for j in range(n)]
    if space.upper() == "G":
        logc = n * n * math.log(math.pi) - math.lgamma(n + 1) - 2 * sum(lf)
    elif space.upper() == "H":
        logc = sum(j * math.log(math.pi) for j in range(n)) - math.lgamma(n + 1) - sum(lf)
    else:
        raise ValueError("space must be 'G' or 'H'")
    return MeasureConstant(space.upper(), n, math.exp(logc))


def identification_factor(l: int, m: int, a) -> np.ndarray:
    """∏_{j<m} π^{l−m} j!/(j+l−m)! · ∏ a^{l−m} for full-rank l×m (l ≥ m) matrices.

    Multiplies a flat-Lebesgue density on ℂ^{l×m} to give the K-invariant
    function on rank-m matrices.
    """
    if l < m:
        l, m = m, l
    a = np.atleast_2d(np.asarray(a, dtype=float))
    logc = sum((l - m) * math.log(math.pi) + math.lgamma(j + 1) - math.lgamma(j + l - m + 1) for j in range(m))
    return math.exp(logc) * np.prod(a, axis=1) ** (l - m)


def sample_ensemble_matrix(kind: str, l: int, m: int, rng, M: int | None = None, size: int | None = None):
    """Matrices from a named ensemble.

    ``ginibre``: l×m complex Gaussian with E|g_ij|² = 1 (squared singular
    values Pólya with ω = a^{|l−m|}e^{−a}).  ``truncated``: the leading l×m
    block of a Haar unitary of size M.  The analytic-only kinds have no
    sampler and are rejected.
    """
    rng = make_rng(rng)
    shape = (l, m) if size is None else (size, l, m)
    if kind == "ginibre":
        return complex_gaussian(shape, rng)
    if kind == "truncated":
        if M is None or l > M or m > M:
            raise ValueError("truncated ensemble needs l, m <= M")
        k = haar_unitary(M, rng, size=size)
        return k[..., :l, :m]
    raise ValueError(f"ensemble {kind!r} has no matrix sampler")


def sample_polya_matrix(weight: PolyaWeight, l: int, m: int, n: int, rng, size: int = 1) -> np.ndarray:
    """K-invariant rank-n l×m matrices whose squared singular values follow the weight."""
    rng = make_rng(rng)
    if n > min(l, m):
        raise ValueError("rank exceeds matrix dimensions")
    sv = weight.sample_squared_sv(n, size, rng)
    u = haar_unitary(l, rng, size=size)[:, :, :n]
    v = haar_unitary(m, rng, size=size)[:, :, :n]
    return (u * np.sqrt(sv)[:, None, :]) @ np.conj(np.swapaxes(v, 1, 2))
