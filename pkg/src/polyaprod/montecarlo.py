"""Matrix-level sampling and goodness-of-fit checks.

Every analytic density in :mod:`polyaprod.products` is checked against
eigenvalues of explicitly sampled products g x g*.  Samples are generated
from a recorded 64-bit seed, so a batch is bit-reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.interpolate import CubicHermiteSpline

from .ensembles import PolyaWeight, sample_ensemble_matrix
from .numerics import RANK_THRESHOLD, gauss_panels, haar_unitary, line_edges, make_rng, vandermonde
from .products import FixedSpectrum, ProductSpec, spectrum_extent
from .spherical import MCEstimate, psi

__all__ = [
    "SampleBatch",
    "GofReport",
    "sample_product_eigs",
    "corank1_project",
    "corank1_density",
    "interlaces",
    "compare_density",
    "product_support",
    "mc_expectation_spherical",
    "SIGMA_LEVEL",
]

SIGMA_LEVEL = 3.0
_P_THRESHOLD = 2.0 * stats.norm.sf(SIGMA_LEVEL)  # two-sided 3σ ≈ 0.0027


@dataclass
class SampleBatch:
    """Sorted non-zero eigenvalues (count, r) of sampled products."""

    spec: ProductSpec
    seed: Optional[int]
    count: int
    eigenvalues: np.ndarray
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GofReport:
    """Outcome of a goodness-of-fit test; ``sigma`` is the two-sided normal equivalent of the p-value."""

    test: str
    statistic: float
    sigma: float
    passed: bool
    pvalue: float
    samples: int
    extra: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------------------
# products

def _sample_x(spec: ProductSpec, size: int, rng) -> np.ndarray:
    if isinstance(spec.x_side, FixedSpectrum):
        return np.broadcast_to(spec.x_side.array, (size, spec.n2))
    return np.asarray(spec.x_side.sample(size, rng), dtype=float)


def sample_product_eigs(spec: ProductSpec, count: int, seed=0, chunk: int = 20000) -> SampleBatch:
    """Eigenvalues of g x g* for ``count`` independent draws.

    g = u·diag(√a_g)·v* with a_g from the weight's matrix sampler and v the
    first n₁ columns of a Haar unitary of size m; x = diag(a) in the first
    n₂ coordinates (fixed or sampled).  The non-zero eigenvalues of g x g*
    coincide with those of diag(√a_g) W* diag(a) W diag(√a_g), W = v[:n₂].
    """
    w = spec.weight
    if not w.sampleable:
        raise ValueError(f"weight {w.kind} has no matrix sampler")
    rng = make_rng(seed)
    t0 = time.perf_counter()
    out, degenerate, done = [], 0, 0
    r = spec.r
    while done < count:
        c = min(chunk, count - done)
        sv = w.sample_squared_sv(spec.n1, c, rng)
        v = haar_unitary(spec.m, rng, size=c)[:, : spec.n2, : spec.n1]
        a = _sample_x(spec, c, rng)
        root = np.sqrt(sv)
        mid = np.conj(np.swapaxes(v, 1, 2)) @ (a[:, :, None] * v)
        mat = root[:, :, None] * mid * root[:, None, :]
        ev = np.linalg.eigvalsh(mat)
        idx = np.argsort(-np.abs(ev), axis=1)
        kept = np.sort(np.take_along_axis(ev, idx[:, :r], axis=1), axis=1)
        if r < ev.shape[1]:
            rest = np.take_along_axis(ev, idx[:, r:r + 1], axis=1)[:, 0]
            scale = np.max(np.abs(ev), axis=1)
            degenerate += int(np.sum(np.abs(rest) > RANK_THRESHOLD * scale))
        degenerate += int(np.sum(np.min(np.abs(kept), axis=1) <= RANK_THRESHOLD * np.max(np.abs(kept), axis=1)))
        out.append(kept)
        done += c
    eig = np.concatenate(out)
    meta = {"wall_time": time.perf_counter() - t0, "degenerate": degenerate}
    return SampleBatch(spec, seed if isinstance(seed, (int, np.integer)) else None, count, eig, meta)


# ---------------------------------------------------------------------------
# co-rank-1 projection

def corank1_project(a, size: int, seed=0) -> np.ndarray:
    """Eigenvalues (size, l−1) of Π k diag(a) k* Π*, Π dropping the last row."""
    a = np.asarray(a, dtype=float)
    if len(a) < 2:
        raise ValueError("need l >= 2")
    if np.min(np.diff(np.sort(a))) <= 1e-12 * np.max(np.abs(a)):
        raise ValueError("spectrum must be non-degenerate")
    rng = make_rng(seed)
    k = haar_unitary(len(a), rng, size=size)[:, :-1, :]
    y = (k * a[None, None, :]) @ np.conj(np.swapaxes(k, 1, 2))
    return np.linalg.eigvalsh(y)


def corank1_density(ap, a) -> np.ndarray:
    """Symmetric density on ℝ^{l−1} of the projected spectrum a′ given a.

    Δ_{l−1}(a′)/Δ_l(a) · det[[1,…,1], [Θ(a_k − a′_j)]_{j<l, k≤l}] with a
    sorted ascending.  For ordered a′ it equals Δ(a′)/Δ(a) on the
    interlacing region and 0 elsewhere; the density of the *ordered*
    spectrum is (l−1)! times this.
    """
    a = np.sort(np.asarray(a, dtype=float))
    ap = np.atleast_2d(np.asarray(ap, dtype=float))
    l = len(a)
    if ap.shape[1] != l - 1:
        raise ValueError("a′ must have length l − 1")
    mats = np.empty((ap.shape[0], l, l))
    mats[:, 0, :] = 1.0
    mats[:, 1:, :] = (a[None, None, :] - ap[:, :, None] > 0).astype(float)
    return vandermonde(ap) / vandermonde(a) * np.linalg.det(mats)


def interlaces(a, ap) -> np.ndarray:
    """a_1 ≤ a′_1 ≤ a_2 ≤ … ≤ a′_{l−1} ≤ a_l for each row of ``ap``."""
    a = np.sort(np.asarray(a, dtype=float))
    ap = np.sort(np.atleast_2d(np.asarray(ap, dtype=float)), axis=1)
    return np.all((ap >= a[None, :-1]) & (ap <= a[None, 1:]), axis=1)


# ---------------------------------------------------------------------------
# goodness of fit

def product_support(spec: ProductSpec, lo_rel: float = 1e-12, panel_width: float = 0.25) -> np.ndarray:
    """Panel edges covering the support of the level density of a product."""
    ext = spectrum_extent(spec, lo_rel)
    return line_edges(ext["hi"], lo=ext["lo"], breakpoints=ext["breakpoints"], sides=ext["sides"],
                      panel_width=panel_width)


def _cdf(density: Callable, edges: np.ndarray, order: int = 10):
    """CDF spline from panel-wise Gauss integration of the density."""
    nodes, weights = gauss_panels(edges, order)
    vals = np.asarray(density(nodes), dtype=float)
    mass = (vals * weights).reshape(len(edges) - 1, order).sum(axis=1)
    cum = np.concatenate([[0.0], np.cumsum(mass)])
    total = cum[-1]
    # one-sided limits so that jumps at the support ends do not bend the spline
    eps = 1e-9 * np.diff(edges).min()
    right = np.asarray(density(edges[:-1] + eps), dtype=float)
    left = np.asarray(density(edges[1:] - eps), dtype=float)
    dens_edges = np.concatenate([[right[0]], 0.5 * (left[:-1] + right[1:]), [left[-1]]])
    spline = CubicHermiteSpline(edges, cum / total, dens_edges / total)
    lo, hi = edges[0], edges[-1]

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.clip(np.where(x <= lo, 0.0, np.where(x >= hi, 1.0, spline(np.clip(x, lo, hi)))), 0.0, 1.0)

    return cdf, total


def _pick(values: np.ndarray, pick: str, rng) -> np.ndarray:
    values = np.atleast_2d(values)
    if pick == "pooled":
        return values.ravel()
    if pick == "random":
        idx = make_rng(rng).integers(0, values.shape[1], size=values.shape[0])
        return values[np.arange(values.shape[0]), idx]
    raise ValueError("pick must be 'random' or 'pooled'")


def compare_density(batch, density: Callable, edges: Sequence[float], test: str = "ks", pick: str = "random",
                    seed=12345, bins: int = 50) -> GofReport:
    """KS or χ² test of sampled eigenvalues against a normalised 1-D density.

    ``batch`` is a :class:`SampleBatch` or an array (count, r).  With
    ``pick="random"`` one eigenvalue per sample is drawn uniformly, which
    gives i.i.d. draws from the level density K(x,x)/r; ``"pooled"`` uses
    all eigenvalues (correlated within a sample).  ``edges`` are panel
    edges covering the support.
    """
    values = batch.eigenvalues if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)
    if values.size == 0:
        raise ValueError("empty batch")
    x = _pick(values, pick, seed)
    cdf, total = _cdf(density, np.asarray(edges, dtype=float))
    extra = {"density_mass": float(total), "pick": pick}
    if test == "ks":
        res = stats.kstest(x, cdf)
        stat, p = float(res.statistic), float(res.pvalue)
    elif test == "chi2":
        grid = np.linspace(edges[0], edges[-1], 20001)
        cg = cdf(grid)
        qs = np.interp(np.linspace(0, 1, bins + 1)[1:-1], cg, grid)
        counts = np.bincount(np.searchsorted(qs, x), minlength=bins)
        probs = np.diff(np.concatenate([[0.0], cdf(qs), [1.0]]))
        expected = probs * len(x)
        ok = expected > 0
        stat = float(np.sum((counts[ok] - expected[ok]) ** 2 / expected[ok]))
        p = float(stats.chi2.sf(stat, int(np.sum(ok)) - 1))
        extra["bins"] = bins
    else:
        raise ValueError("test must be 'ks' or 'chi2'")
    sigma = float(stats.norm.isf(max(p, 1e-300) / 2.0))
    return GofReport(test, stat, sigma, p >= _P_THRESHOLD, p, len(x), extra)


# ---------------------------------------------------------------------------
# spherical transforms as expectations

def _sample_squared_sv(kind: str, l: int, m: int, params: dict, size: int, rng) -> np.ndarray:
    if kind == "polya":
        weight: PolyaWeight = params["weight"]
        return weight.sample_squared_sv(min(l, m), size, rng)
    g = sample_ensemble_matrix(kind, l, m, rng, M=params.get("M"), size=size)
    if kind == "ginibre" and params.get("nu", abs(l - m)) != abs(l - m):
        raise ValueError("the ginibre matrix model fixes nu = |l − m|")
    gg = g @ np.conj(np.swapaxes(g, 1, 2)) if l <= m else np.conj(np.swapaxes(g, 1, 2)) @ g
    return np.clip(np.linalg.eigvalsh(gg), 0.0, None)


def mc_expectation_spherical(kind: str, profile, params: Optional[dict], s, samples: int, seed=0,
                             chunk: int = 20000) -> MCEstimate:
    """E[Ψ(s; g)] over sampled matrices g (the spherical transform as a mean).

    ``kind`` is "ginibre" (l×m complex Gaussian), "truncated" (l×m block of
    a Haar unitary of size ``params["M"]``) or "polya" (``params["weight"]``,
    any sampleable catalog weight); ``profile`` is (l, m).
    """
    l, m = profile
    params = dict(params or {})
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if len(s) != min(l, m):
        raise ValueError("need min(l, m) frequencies")
    rng = make_rng(seed)
    vals, done = [], 0
    while done < samples:
        c = min(chunk, samples - done)
        a = _sample_squared_sv(kind, l, m, params, c, rng)
        vals.append(np.asarray(psi(s, a), dtype=complex))
        done += c
    v = np.concatenate(vals)
    if not np.all(np.isfinite(v)):
        raise FloatingPointError("Ψ overflowed for these frequencies (variance overflow)")
    mean = complex(v.mean())
    err = math.sqrt(float(np.sum(np.abs(v - mean) ** 2)) / max(len(v) - 1, 1) / len(v))
    if not math.isfinite(err):
        raise FloatingPointError("variance overflow")
    return MCEstimate(mean, err, len(v))
