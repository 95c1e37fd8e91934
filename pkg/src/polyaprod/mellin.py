"""Mellin transforms on the half line and on the real line with a sign channel.

On ℝ the transform carries a parity ``L``::

    Mf(s, L) = ∫ dx/|x| sign(x)^L |x|^s f(x) = Mf₊(s) + (−1)^L Mf₋(s),

with ``f₋(x) = f(−x)``.  The inverse is taken along Re s = 1 with the
regularizer ``ζ₁(εs)`` and the limit ε → 0 is extrapolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .numerics import (DEFAULT_QUAD, QuadratureConfig, QuadratureError, decay_radius, gauss_panels,
                       integrate_line, integrate_line_complex, log_rule)

__all__ = [
    "UnivariateFunction",
    "InversionResult",
    "mellin_half_line",
    "mellin_full_line",
    "zeta_regularizer",
    "neville_zero",
    "frequency_cutoff",
    "inverse_mellin",
    "inverse_mellin_points",
    "mellin_convolve",
    "DEFAULT_EPS",
]

DEFAULT_EPS = (0.1, 0.05, 0.025, 0.0125)


@dataclass(frozen=True)
class UnivariateFunction:
    """A vectorised real function with the metadata quadrature needs.

    ``breakpoints`` are moduli |x| where f is not smooth, ``upper`` is a bound
    on |x| beyond which f vanishes identically, ``order`` is the largest j with
    finite absolute moments ∫|x^j f(x)| dx.
    """

    func: Callable[[np.ndarray], np.ndarray]
    support: str = "positive"
    breakpoints: tuple = ()
    upper: float = math.inf
    order: int = 0

    def __post_init__(self):
        if self.support not in ("positive", "full"):
            raise ValueError("support must be 'positive' or 'full'")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.func(x), dtype=float)
        if self.support == "positive":
            out = np.where(x > 0, out, 0.0)
        return out

    def reflected(self) -> "UnivariateFunction":
        """x ↦ f(−x) restricted to x > 0."""
        return UnivariateFunction(lambda x: self.func(-np.asarray(x)), "positive", self.breakpoints,
                                  self.upper, self.order)


def _as_function(f) -> UnivariateFunction:
    return f if isinstance(f, UnivariateFunction) else UnivariateFunction(f)


def _effective_upper(f: UnivariateFunction) -> float:
    if math.isfinite(f.upper):
        return f.upper
    return decay_radius(lambda a: f(a) * a, start=1.0, tiny=1e-22)


def _half_line_fixed(f: UnivariateFunction, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    re_min = max(float(np.min(s.real)), 1e-3)
    lo = math.exp(-min(700.0, 42.0 / re_min))
    hi = _effective_upper(f)
    # resolve the oscillation |x|^{i Im s} on the logarithmic grid
    width = min(0.25, 1.5 / max(1.0, float(np.max(np.abs(s.imag)))))
    a, w = log_rule(lo, hi, breakpoints=f.breakpoints, panel_width=width, order=16)
    vals = f(a) * w / a
    ln_a = np.log(a)
    return np.exp(np.multiply.outer(s, ln_a)) @ vals


def mellin_half_line(f, s, cfg: QuadratureConfig = DEFAULT_QUAD, method: str | None = None):
    """``∫₀^∞ a^{s−1} f(a) da``.

    Scalar ``s`` uses adaptive quadrature in t = ln a; array ``s`` (or
    ``method="fixed"``) uses one shared composite Gauss rule.
    """
    f = _as_function(f)
    if method is None:
        method = "adaptive" if np.ndim(s) == 0 else "fixed"
    if method == "fixed":
        return _half_line_fixed(f, np.atleast_1d(s)).reshape(np.shape(s))
    s = complex(s)
    t_hi = math.log(_effective_upper(f))
    pts = [math.log(b) for b in f.breakpoints if b > 0]

    def integrand(t):
        return complex(np.exp(s * t) * f(np.exp(t)))

    return integrate_line_complex(integrand, (-math.inf, t_hi), cfg, pts).value


def mellin_full_line(f, s, L: int, cfg: QuadratureConfig = DEFAULT_QUAD, method: str | None = None):
    """``Mf(s, L) = Mf₊(s) + (−1)^L Mf₋(s)`` for a function on ℝ."""
    f = _as_function(f)
    if L not in (0, 1):
        raise ValueError("parity L must be 0 or 1")
    plus = mellin_half_line(f, s, cfg, method)
    if f.support == "positive":
        return plus
    minus = mellin_half_line(f.reflected(), s, cfg, method)
    return plus + (-1) ** L * minus


def zeta_regularizer(z, order: int = 1):
    """``ζₙ(z) = cos z / ∏_{k≤n} [1 − 4z²/(π(2k−1))²]``, removable points included.

    Near a removable point z₀ = ±π(2k−1)/2 the matching factor is rewritten
    with h = z − z₀ as ``sin(z₀) z₀ sinc(h) / (2 + h/z₀)`` which is exact and
    free of cancellation.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    z = np.asarray(z, dtype=float)
    poles = math.pi * (2 * np.arange(1, order + 1) - 1) / 2.0
    out = np.cos(z)
    az = np.abs(z)
    nearest = np.argmin(np.abs(az[..., None] - poles), axis=-1)
    near = np.abs(az - poles[nearest]) < 1e-4
    for k, z0 in enumerate(poles):
        fac = 1.0 - (z / z0) ** 2
        hit = near & (nearest == k)
        safe = np.where(hit, 1.0, fac)
        out = np.where(hit, out, out / safe)
    if np.any(near):
        z0 = np.where(z >= 0, poles[nearest], -poles[nearest])
        h = z - z0
        core = np.sin(z0) * z0 * np.sinc(h / math.pi) / (2.0 + h / z0)
        out = np.where(near, core * np.where(near, _other_factors(z, nearest, poles), 1.0), out)
    return out if out.ndim else float(out)


def _other_factors(z, nearest, poles):
    acc = np.ones_like(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k, z0 in enumerate(poles):
            acc = np.where(nearest == k, acc, acc / (1.0 - (z / z0) ** 2))
    return acc


def neville_zero(h: Sequence[float], values: Sequence[complex]):
    """Polynomial extrapolation of values(h) to h = 0.

    Returns ``(estimate, increment)``, the increment being the change added by
    the last node (a practical error estimate).
    """
    h = list(map(float, h))
    p = [complex(v) for v in values]
    n = len(p)
    table = [p[:]]
    for k in range(1, n):
        prev = table[-1]
        row = []
        for i in range(n - k):
            row.append((h[i] * prev[i + 1] - h[i + k] * prev[i]) / (h[i] - h[i + k]))
        table.append(row)
    best = table[-1][0]
    err = abs(best - table[-2][0]) if n > 1 else math.inf
    return best, err


@dataclass
class InversionResult:
    value: float
    error: float
    estimates: list = field(default_factory=list)
    cutoff: float = 0.0


def frequency_cutoff(magnitude: Callable[[float], float], tol: float, start: float = 8.0,
                     limit: float = 4096.0) -> float:
    """Smallest S (doubling from ``start``) with magnitude(S') < tol for S' ≥ S probes."""
    S = start
    while S < limit:
        probe = max(magnitude(S), magnitude(1.5 * S), magnitude(2.0 * S))
        if probe < tol:
            return S
        S *= 2.0
    return limit


def inverse_mellin(Mf: Callable[[np.ndarray, int], np.ndarray], x: float, eps_schedule=DEFAULT_EPS,
                   cfg: QuadratureConfig = DEFAULT_QUAD, cutoff: float | None = None,
                   tolerance: float | None = None) -> InversionResult:
    """Regularised inverse Mellin transform on ℝ at the point ``x``.

    ``Mf(s, L)`` must accept an array of complex ``s`` on the line Re s = 1.
    For every ε the truncated integral

        (1/4π) Σ_L sign(x)^L ∫_{−S}^{S} Mf(1+is, L) |x|^{−is−1} ζ₁(εs) ds

    is evaluated with composite Gauss-Legendre panels; the ε-sequence is then
    extrapolated polynomially in ε².  ``tolerance`` (if given) raises when the
    extrapolation increment exceeds it.
    """
    return inverse_mellin_points(Mf, [x], eps_schedule, cfg, cutoff, tolerance)[0]


def inverse_mellin_points(Mf: Callable[[np.ndarray, int], np.ndarray], xs: Sequence[float],
                          eps_schedule=DEFAULT_EPS, cfg: QuadratureConfig = DEFAULT_QUAD,
                          cutoff: float | None = None, tolerance: float | None = None) -> list:
    """:func:`inverse_mellin` at several points sharing one evaluation of ``Mf``.

    The frequency grid is resolved for the point with the largest |ln|x||,
    so every point gets at least the accuracy it would get on its own.
    """
    xs = [float(x) for x in xs]
    if any(x == 0 for x in xs):
        raise ValueError("x must be nonzero")
    eps = sorted(map(float, eps_schedule), reverse=True)

    def mag(S):
        vals = [abs(Mf(np.array([1 + 1j * S, 1 - 1j * S]), L)).max() for L in (0, 1)]
        return max(vals)

    peak = max(max(abs(Mf(np.array([1.0 + 0j]), L))[0] for L in (0, 1)), 1e-300)
    S = cutoff or frequency_cutoff(mag, cfg.abs_tol * 1e-2 * max(1.0, peak))
    lmax = max(abs(math.log(abs(x))) for x in xs)
    width = min(0.5, 2.0 / max(1.0, lmax))
    nodes, weights = gauss_panels(np.linspace(-S, S, int(math.ceil(2 * S / width)) + 1), 16)
    s = 1.0 + 1j * nodes
    even, odd = Mf(s, 0), Mf(s, 1)
    regs = [zeta_regularizer(e * nodes, 1) for e in eps]
    out = []
    for x in xs:
        sgn = 1.0 if x > 0 else -1.0
        lx = math.log(abs(x))
        core = (even + sgn * odd) * np.exp((-1j * nodes - 1.0) * lx) * weights / (4.0 * math.pi)
        estimates = [complex(np.sum(core * r)) for r in regs]
        value, err = neville_zero([e * e for e in eps], estimates)
        if tolerance is not None and err > tolerance:
            raise QuadratureError(f"epsilon extrapolation unstable (increment {err:.3g})")
        out.append(InversionResult(float(value.real), float(err), estimates, S))
    return out


def mellin_convolve(p, q, a: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``(p ⊛ q)(a) = ∫₀^∞ (da'/a') p(a') q(a/a')`` for p on ℝ₊ and q on ℝ."""
    p, q = _as_function(p), _as_function(q)
    if a == 0:
        raise ValueError("a must be nonzero")
    if a < 0 and q.support == "positive":
        return 0.0
    la = math.log(abs(a))
    t_hi = math.log(_effective_upper(p))
    q_side = q if a > 0 else q.reflected()
    t_lo = la - math.log(_effective_upper(q_side))
    if t_lo >= t_hi:
        return 0.0
    pts = [math.log(b) for b in p.breakpoints if b > 0] + [la - math.log(b) for b in q.breakpoints if b > 0]

    def integrand(t):
        return float(p(np.exp(t)) * q(a * np.exp(-t)))

    return integrate_line(integrand, (t_lo, t_hi), cfg, pts).value
