"""Linear algebra, quadrature and contour primitives shared by every module.

Everything here is deliberately small: batched Haar sampling, Hermitian
eigenvalues (LAPACK by default, a cyclic complex Jacobi solver as an
independent cross-check), adaptive and fixed-rule quadrature, and the
trapezoid rule on circles around the origin.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "QuadratureConfig",
    "QuadResult",
    "QuadratureError",
    "RANK_THRESHOLD",
    "make_rng",
    "spawn_rngs",
    "complex_gaussian",
    "haar_unitary",
    "hermitian_eigenvalues",
    "jacobi_eigh",
    "strip_zeros",
    "top_abs",
    "squared_singular_values",
    "integrate_line",
    "integrate_line_complex",
    "gauss_panels",
    "log_rule",
    "line_rule",
    "decay_radius",
    "contour_origin",
    "laurent_coefficients",
    "vandermonde",
    "as_signed_spectrum",
    "as_positive_spectrum",
]

#: relative threshold below which an eigenvalue counts as a numerical zero
RANK_THRESHOLD = 1e-10


class QuadratureError(RuntimeError):
    """Raised when an adaptive integral fails to reach its tolerance."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for the adaptive and contour integrals.

    ``contour_points`` is the number of trapezoid nodes on a circle; it must
    be even and at least 8.
    """

    abs_tol: float = 1e-11
    rel_tol: float = 1e-10
    max_subdivisions: int = 400
    contour_points: int = 256

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.contour_points < 8 or self.contour_points % 2:
            raise ValueError("contour_points must be even and >= 8")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureConfig()


@dataclass(frozen=True)
class QuadResult:
    value: float | complex
    error: float


# ---------------------------------------------------------------------------
# random streams

def make_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    """PCG64 generator from a 64-bit seed (generators pass through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent child streams of one recorded seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def complex_gaussian(shape, rng: np.random.Generator) -> np.ndarray:
    """Standard complex normals, density exp(-|z|^2)/pi (so E|z|^2 = 1)."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(0.5)


def haar_unitary(dim: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-distributed unitary matrices via QR with the phase fix.

    Returns a ``(dim, dim)`` array, or ``(size, dim, dim)`` when ``size`` is
    given.  The diagonal of R is rotated onto the positive axis; without this
    step the QR output is not Haar distributed.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    shape = (dim, dim) if size is None else (size, dim, dim)
    z = complex_gaussian(shape, rng)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    phase = d / np.abs(d)
    return q * phase[..., None, :]


# ---------------------------------------------------------------------------
# eigenvalues

def _check_hermitian(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim < 2 or x.shape[-1] != x.shape[-2]:
        raise ValueError("matrix must be square")
    scale = np.max(np.abs(x)) if x.size else 0.0
    dev = np.max(np.abs(x - np.conj(np.swapaxes(x, -1, -2)))) if x.size else 0.0
    if dev > 1e-12 * max(scale, np.finfo(float).tiny):
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3g})")
    return x


def jacobi_eigh(x: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60):
    """Cyclic complex Jacobi eigen-decomposition of one Hermitian matrix.

    Each 2x2 pivot is first made real by a diagonal phase and then annihilated
    by a plane rotation.  Returns ``(eigenvalues ascending, eigenvectors)``.
    """
    a = np.array(_check_hermitian(x), dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a) ** 2) - np.sum(np.abs(np.diag(a)) ** 2))
        if off <= tol * max(np.linalg.norm(a), np.finfo(float).tiny):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # unitary acting on the (p, q) plane: diag(1, conj(phase)) @ rotation
                u = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ u
                a[idx, :] = np.conj(u.T) @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ u
    w = np.real(np.diag(a))
    order = np.argsort(w)
    return w[order], v[:, order]


def hermitian_eigenvalues(x: np.ndarray, vectors: bool = False, method: str = "lapack"):
    """All eigenvalues of a Hermitian matrix (or stack), ascending, zeros kept.

    ``method="jacobi"`` uses :func:`jacobi_eigh` (single matrices only).
    """
    x = _check_hermitian(x)
    if method == "jacobi":
        if x.ndim != 2:
            raise ValueError("jacobi method handles one matrix at a time")
        w, v = jacobi_eigh(x)
        return (w, v) if vectors else w
    if method != "lapack":
        raise ValueError(f"unknown method {method!r}")
    if vectors:
        return np.linalg.eigh(x)
    return np.linalg.eigvalsh(x)


def strip_zeros(values: np.ndarray, threshold: float = RANK_THRESHOLD) -> np.ndarray:
    """Drop entries with |v| <= threshold * max|v| (one spectrum)."""
    values = np.asarray(values)
    scale = np.max(np.abs(values)) if values.size else 0.0
    return values[np.abs(values) > threshold * scale]


def top_abs(values: np.ndarray, r: int) -> np.ndarray:
    """Keep the ``r`` entries of largest modulus along the last axis, sorted.

    Batched rank stripping when the rank is known in advance.
    """
    values = np.asarray(values)
    idx = np.argsort(-np.abs(values), axis=-1)[..., :r]
    kept = np.take_along_axis(values, idx, axis=-1)
    return np.sort(kept, axis=-1)


def squared_singular_values(g: np.ndarray) -> np.ndarray:
    """Nonzero eigenvalues of g g*, ascending."""
    g = np.asarray(g)
    if g.ndim != 2:
        raise ValueError("expected a matrix")
    if not np.any(g):
        raise ValueError("zero matrix has no nonzero singular values")
    sv = np.linalg.svd(g, compute_uv=False)
    a = np.sort(sv**2)
    return strip_zeros(a)


def as_signed_spectrum(a) -> np.ndarray:
    a = np.sort(np.asarray(a, dtype=float).ravel())
    if np.any(a == 0) or not np.all(np.isfinite(a)):
        raise ValueError("signed spectrum must be finite and nonzero")
    return a


def as_positive_spectrum(a) -> np.ndarray:
    a = np.sort(np.asarray(a, dtype=float).ravel())
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ValueError("positive spectrum must be finite and > 0")
    return a


# ---------------------------------------------------------------------------
# quadrature

def integrate_line(f: Callable[[float], float], domain, cfg: QuadratureConfig = DEFAULT_QUAD,
                   points: Sequence[float] = ()) -> QuadResult:
    """Adaptive Gauss-Kronrod integral of a real function.

    ``domain`` is ``"half-line"`` (0, inf), ``"full-line"`` or a pair
    ``(lo, hi)`` (either end may be infinite).  Interior ``points`` split the
    range.  Raises :class:`QuadratureError` when the reported error exceeds
    ``max(abs_tol, rel_tol*|value|)`` by more than a factor 10.
    """
    if domain == "half-line":
        lo, hi = 0.0, math.inf
    elif domain == "full-line":
        lo, hi = -math.inf, math.inf
    else:
        lo, hi = map(float, domain)
    cuts = sorted(p for p in points if lo < p < hi)
    edges = [lo, *cuts, hi]
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, e = integrate.quad(f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                                    limit=cfg.max_subdivisions)
        total += val
        err += e
    if err > 10 * max(cfg.abs_tol, cfg.rel_tol * abs(total)):
        raise QuadratureError(f"integral did not converge: value {total!r}, error {err:.3g}")
    return QuadResult(total, err)


def integrate_line_complex(f: Callable[[float], complex], domain, cfg: QuadratureConfig = DEFAULT_QUAD,
                           points: Sequence[float] = ()) -> QuadResult:
    re = integrate_line(lambda t: float(np.real(f(t))), domain, cfg, points)
    im = integrate_line(lambda t: float(np.imag(f(t))), domain, cfg, points)
    return QuadResult(complex(re.value, im.value), math.hypot(re.error, im.error))


@lru_cache(maxsize=64)
def _legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def gauss_panels(edges, order: int = 16):
    """Composite Gauss-Legendre nodes/weights on consecutive panels."""
    edges = np.asarray(edges, dtype=float)
    x, w = _legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _panel_edges(lo: float, hi: float, width: float, cuts=(), grade: int = 0):
    """Uniform panels of at most ``width`` with ``cuts`` as edges.

    With ``grade > 0`` the panels next to each cut shrink geometrically
    (width·2^-i, i ≤ grade), which restores fast convergence for algebraic
    endpoint singularities such as (1 − a)^γ at a cut.
    """
    inner = [c for c in cuts if lo <= c <= hi]
    extra = []
    for c in inner:
        for i in range(1, grade + 1):
            extra.extend([c - width * 2.0**-i, c + width * 2.0**-i])
    knots = sorted({lo, hi, *inner, *[e for e in extra if lo < e < hi]})
    edges = [knots[0]]
    for a, b in zip(knots[:-1], knots[1:]):
        k = max(1, int(math.ceil((b - a) / width)))
        edges.extend(np.linspace(a, b, k + 1)[1:])
    return np.asarray(edges)


def log_rule(lo: float, hi: float, breakpoints=(), panel_width: float = 0.25, order: int = 16,
             grade: int = 12):
    """Rule for ``∫_lo^hi f(a) da`` (0 < lo < hi) with panels uniform in ln a.

    The returned weights already contain the Jacobian ``a``; breakpoints are
    kept as panel edges (with geometric grading towards them) so jumps and
    edge singularities in f do not spoil the convergence.
    """
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    cuts = [math.log(b) for b in breakpoints if lo <= b <= hi]
    t, w = gauss_panels(_panel_edges(math.log(lo), math.log(hi), panel_width, cuts, grade), order)
    a = np.exp(t)
    return a, w * a


def line_rule(hi: float, lo: float = 1e-14, breakpoints=(), sides=(-1, 1), **kw):
    """Log rule mirrored onto the requested sides of the origin.

    Breakpoints are given as moduli.  Returns nodes sorted ascending.
    """
    a, w = log_rule(lo, hi, breakpoints=breakpoints, **kw)
    nodes, weights = [], []
    if -1 in sides:
        nodes.append(-a[::-1])
        weights.append(w[::-1])
    if 1 in sides:
        nodes.append(a)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def line_edges(hi: float, lo: float = 1e-14, breakpoints=(), sides=(-1, 1), panel_width: float = 0.25,
               grade: int = 12) -> np.ndarray:
    """Panel edges (ascending) of :func:`line_rule`, including the gap at 0."""
    cuts = [math.log(b) for b in breakpoints if lo <= b <= hi]
    e = np.exp(_panel_edges(math.log(lo), math.log(hi), panel_width, cuts, grade))
    parts = []
    if -1 in sides:
        parts.append(-e[::-1])
    if 1 in sides:
        parts.append(e)
    return np.concatenate(parts)


def decay_radius(f: Callable[[np.ndarray], np.ndarray], start: float = 1.0, tiny: float = 1e-18,
                 limit: float = 1e12) -> float:
    """Smallest power-of-two radius beyond which |f| stays below ``tiny``·peak.

    ``f`` is probed on a geometric grid; used to cut half-line integrals.
    """
    grid = start * 2.0 ** np.arange(-20, int(math.log2(limit / start)) + 1)
    vals = np.abs(np.asarray(f(grid), dtype=complex))
    peak = np.max(vals)
    if peak == 0:
        return start
    above = np.nonzero(vals > tiny * peak)[0]
    return float(min(limit, 4.0 * grid[above[-1]]))


# ---------------------------------------------------------------------------
# contours

def contour_origin(f: Callable[[np.ndarray], np.ndarray], pole_order: int = 0, radius: float = 1.0,
                   cfg: QuadratureConfig = DEFAULT_QUAD) -> complex:
    """``(1/2πi) ∮ f(z) z^(-pole_order) dz`` on |z| = radius, counter-clockwise.

    N-point trapezoid rule; exact for Laurent polynomials whose degrees lie
    strictly between -N/2 and N/2.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = cfg.contour_points
    z = radius * np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.asarray(f(z), dtype=complex) * z ** (1 - pole_order)
    return complex(np.mean(vals))


def laurent_coefficients(f: Callable[[np.ndarray], np.ndarray], degrees, radius: float = 1.0,
                         points: int = 256) -> np.ndarray:
    """Coefficients of ``z^k`` for ``k`` in ``degrees`` by the trapezoid rule."""
    z = radius * np.exp(2j * np.pi * np.arange(points) / points)
    vals = np.asarray(f(z), dtype=complex)
    ks = np.asarray(list(degrees))
    return np.array([np.mean(vals * z ** (-k)) for k in ks])


# ---------------------------------------------------------------------------

def vandermonde(a) -> complex | float:
    """∏_{c>d} (a_c − a_d); 1 for empty or single-entry input.

    Works along the last axis for stacked input.
    """
    a = np.asarray(a)
    if a.ndim == 0 or a.shape[-1] < 2:
        return np.ones(a.shape[:-1]) if a.ndim > 1 else 1.0
    n = a.shape[-1]
    out = np.ones(a.shape[:-1], dtype=a.dtype if np.iscomplexobj(a) else float)
    for c in range(1, n):
        for d in range(c):
            out = out * (a[..., c] - a[..., d])
    return out if a.ndim > 1 else out[()]
