"""Spherical functions Φ (Hermitian, fixed rank) and Ψ (rectangular), their
normalisation constants, transforms, factorisation and inversion.

Closed forms::

    Φ(s, L; a) = ∏_{j<n} j! · det[sign(a_c)^{L_b} |a_c|^{s_b}] / (Δ(a) Δ(s))
    Ψ(s; a)    = ∏_{j<n} j! · det[a_c^{s_b}] / (Δ(a) Δ(s))

with Δ(a) = ∏_{c>d}(a_c − a_d).  Coincident (or nearly coincident) entries
of ``s`` or ``a`` are handled by replacing rows/columns with divided
differences, each computed as a small trapezoid contour integral around
the cluster; this is exact in the confluent limit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln, loggamma

from .mellin import DEFAULT_EPS, frequency_cutoff, neville_zero, zeta_regularizer
from .numerics import (QuadratureError, gauss_panels, haar_unitary,
                       line_rule, log_rule, make_rng, top_abs, vandermonde)

__all__ = [
    "Frequency",
    "standard_frequency",
    "phi",
    "psi",
    "normalization_C",
    "MCEstimate",
    "DefinitionEstimate",
    "phi_definition_mc",
    "spherical_transform_phi",
    "spherical_transform_psi",
    "tabulated_transform_psi",
    "inverse_spherical_phi",
    "inverse_spherical_psi",
    "factorization_rhs",
    "factorization_lhs_mc",
    "RankLimitResult",
    "rank_limit_check",
]

S_CLUSTER_TOL = 1e-6
A_CLUSTER_TOL = 1e-8
_CONTOUR_NODES = 64


@dataclass(frozen=True)
class Frequency:
    """Spherical frequency: complex ``s`` and parities ``L`` of equal length."""

    s: tuple
    L: tuple

    def __post_init__(self):
        if len(self.s) != len(self.L):
            raise ValueError("s and L must have the same length")
        if any(int(x) not in (0, 1) for x in self.L):
            raise ValueError("parities must be 0 or 1")

    @property
    def n(self) -> int:
        return len(self.s)


def standard_frequency(n: int) -> Frequency:
    """s = (n−1, …, 1, 0) and L = (mod₂(n−1), …, 1, 0)."""
    return Frequency(tuple(float(n - 1 - b) for b in range(n)), tuple((n - 1 - b) % 2 for b in range(n)))


def _factorial_prefactor(n: int) -> float:
    return math.exp(sum(gammaln(j + 1) for j in range(n)))


# ---------------------------------------------------------------------------
# confluent machinery

def _clusters(values: np.ndarray, tol: float) -> list[list[int]]:
    """Group indices whose values lie within ``tol`` of a neighbour (transitively)."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) < tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def _divided_difference_functionals(nodes: np.ndarray, groups: list[list[int]], radius_for):
    """For every position, (points, weights) realising the Newton divided
    difference over the leading members of its cluster.

    For a singleton this is just point evaluation.  For the j-th member of a
    cluster the functional is (1/2πi)∮ F(z) dz / ∏_{i≤j}(z − x_i) on a circle
    around the cluster.
    """
    order: list[int] = []
    funcs = []
    theta = 2 * np.pi * np.arange(_CONTOUR_NODES) / _CONTOUR_NODES
    for g in groups:
        order.extend(g)
        if len(g) == 1:
            funcs.append((np.array([nodes[g[0]]], dtype=complex), np.array([1.0 + 0j])))
            continue
        pts = nodes[g]
        center = np.mean(pts)
        rho = radius_for(center, np.max(np.abs(pts - center)))
        z = center + rho * np.exp(1j * theta)
        for j in range(1, len(g) + 1):
            denom = np.prod(z[:, None] - pts[None, :j], axis=1)
            funcs.append((z, (z - center) / denom / _CONTOUR_NODES))
    return order, funcs


def _cross_vandermonde(values: np.ndarray, groups: list[list[int]]):
    """∏_{c>d} (v_c − v_d) over pairs from different clusters, in cluster order."""
    label = {}
    order = []
    for k, g in enumerate(groups):
        for i in g:
            label[i] = k
            order.append(i)
    out = 1.0 + 0j
    for c in range(len(order)):
        for d in range(c):
            ic, id_ = order[c], order[d]
            if label[ic] != label[id_]:
                out *= values[ic] - values[id_]
    return out


def _s_radius(center, spread):
    return 0.5 + 2.0 * spread


def _phi_core(s: np.ndarray, L: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Determinant ratio det[σ^L |a|^s] / (Δ(a)Δ(s)) for a batch ``a`` (N, n)."""
    n = len(s)
    scale_s = max(1.0, float(np.max(np.abs(s))))
    s_groups = _clusters(s, S_CLUSTER_TOL * scale_s)
    for g in s_groups:
        if len({int(L[i]) for i in g}) > 1:
            raise ZeroDivisionError("coincident frequencies with different parities (pole of Φ)")
    s_order, s_funcs = _divided_difference_functionals(s.astype(complex), s_groups, _s_radius)
    s_cross = _cross_vandermonde(s.astype(complex), s_groups)
    L_ord = L[s_order]

    N = a.shape[0]
    out = np.empty(N, dtype=complex)
    abs_a = np.abs(a)
    gaps_ok = np.ones(N, dtype=bool)
    if n > 1:
        srt = np.sort(a, axis=1)
        scale = np.max(abs_a, axis=1)
        gaps_ok = np.min(np.diff(srt, axis=1), axis=1) >= A_CLUSTER_TOL * scale
    idx = np.nonzero(gaps_ok)[0]
    if idx.size:
        ln_a = np.log(abs_a[idx])
        sign = np.sign(a[idx])
        mat = np.zeros((idx.size, n, n), dtype=complex)
        for b, (z, w) in enumerate(s_funcs):
            sg = sign ** int(L_ord[b])
            # Σ_p w_p exp(z_p ln|a|)
            mat[:, b, :] = sg * np.tensordot(np.exp(ln_a[..., None] * z), w, axes=([2], [0]))
        out[idx] = np.linalg.det(mat) / (vandermonde(a[idx]) * s_cross)
    for i in np.nonzero(~gaps_ok)[0]:
        out[i] = _phi_confluent_row(a[i], s_funcs, L_ord, s_cross)
    return out


def _phi_confluent_row(a_row, s_funcs, L_ord, s_cross):
    n = len(a_row)
    scale = np.max(np.abs(a_row))
    a_groups = _clusters(a_row, A_CLUSTER_TOL * scale)
    for g in a_groups:
        if len({np.sign(a_row[i]) for i in g}) > 1 or np.any(a_row[g] == 0):
            raise ZeroDivisionError("eigenvalue cluster straddles zero")

    def a_radius(center, spread):
        return max(abs(center) / 4.0, 4.0 * spread)

    a_order, a_funcs = _divided_difference_functionals(a_row.astype(complex), a_groups, a_radius)
    a_cross = _cross_vandermonde(a_row.astype(complex), a_groups)
    mat = np.zeros((n, n), dtype=complex)
    for c, (w_pts, w_wts) in enumerate(a_funcs):
        sigma = np.sign(a_row[a_order[c]])
        log_w = np.log(sigma * w_pts)
        for b, (z, zw) in enumerate(s_funcs):
            vals = np.exp(np.multiply.outer(z, log_w)) * sigma ** int(L_ord[b])
            mat[b, c] = zw @ vals @ w_wts
    return np.linalg.det(mat) / (a_cross * s_cross)


def phi(s, L, a) -> complex | np.ndarray:
    """Spherical function Φ(s, L; a) on nonzero real spectra.

    ``a`` may be a single spectrum of length n or a stack ``(N, n)``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    L = np.atleast_1d(np.asarray(L, dtype=int)) % 2
    a = np.asarray(a, dtype=float)
    single = a.ndim == 1
    a2 = np.atleast_2d(a)
    n = len(s)
    if len(L) != n or a2.shape[1] != n:
        raise ValueError("s, L and a must have equal length")
    if np.any(a2 == 0):
        raise ValueError("spectrum contains a zero eigenvalue")
    out = _factorial_prefactor(n) * _phi_core(s, L, a2)
    return out[0] if single else out


def psi(s, a) -> complex | np.ndarray:
    """Spherical function Ψ(s; a) on positive spectra (squared singular values)."""
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("Ψ needs strictly positive spectra")
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    return phi(s, np.zeros(len(s), dtype=int), a)


def normalization_C(l: int, n: int, s) -> complex:
    """C_{l,n}(s) = ∏_j (l−j)! Γ(s_j+1) / ((n−j)! Γ(s_j+l−n+1)); unity for l = n."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if len(s) != n:
        raise ValueError("need n frequencies")
    if n > l:
        raise ValueError("rank n cannot exceed l")
    if l == n:
        return 1.0 + 0j
    for sj in s:
        for arg in (sj + 1, sj + l - n + 1):
            if abs(arg.imag) < 1e-14 and arg.real <= 0 and abs(arg.real - round(arg.real)) < 1e-14:
                raise ZeroDivisionError(f"Gamma pole at s = {sj}")
    j = np.arange(1, n + 1)
    log_c = np.sum(gammaln(l - j + 1) - gammaln(n - j + 1) + loggamma(s + 1) - loggamma(s + l - n + 1))
    return complex(np.exp(log_c))


# ---------------------------------------------------------------------------
# Monte Carlo of the defining Haar average

@dataclass(frozen=True)
class MCEstimate:
    value: complex
    stderr: float
    samples: int

    def sigmas(self, target: complex) -> float:
        diff = abs(self.value - target)
        if self.stderr > 1e-12 * max(1.0, abs(self.value)):
            return diff / self.stderr
        # zero-variance estimators (e.g. rank n = l = 1) must match to rounding
        return 0.0 if diff <= 1e-12 * max(1.0, abs(target)) else math.inf


@dataclass(frozen=True)
class DefinitionEstimate:
    ratio: MCEstimate
    numerator: MCEstimate
    denominator: MCEstimate


def _mean_and_stderr(vals: np.ndarray):
    n = vals.size
    mean = vals.mean()
    dev = vals - mean
    err = math.sqrt(float(np.sum(np.abs(dev) ** 2)) / max(n - 1, 1) / n)
    return complex(mean), err


def _leading_minor_weights(y: np.ndarray, s: np.ndarray, L: np.ndarray) -> np.ndarray:
    """∏_j sign(det_j)^{L_j−L_{j+1}−1} |det_j|^{s_j−s_{j+1}−1} with s_{n+1}=L_{n+1}=−1."""
    n = len(s)
    s_ext = np.append(s, -1.0)
    L_ext = np.append(L, -1)
    out = np.ones(y.shape[0], dtype=complex)
    for j in range(1, n + 1):
        d = np.real(np.linalg.det(y[:, :j, :j]))
        ds = s_ext[j - 1] - s_ext[j] - 1.0
        dl = int(L_ext[j - 1] - L_ext[j] - 1) % 2
        with np.errstate(divide="ignore"):
            out *= np.sign(d) ** dl * np.exp(ds * np.log(np.abs(d)))
    return out


def phi_definition_mc(s, L, a, l: int, samples: int, rng, x: np.ndarray | None = None,
                      chunk: int = 20000) -> DefinitionEstimate:
    """Monte Carlo of the Haar-average definition of Φ.

    Numerator: E_k ∏_j sign(det P_j)^{L_j−L_{j+1}−1}|det P_j|^{s_j−s_{j+1}−1}
    with P_j the leading j×j block of k x k*; denominator: the same with x
    replaced by the rank-n projector.  Both use the same Haar draws.  The
    ratio estimates Φ(s, L; a) and the numerator estimates C_{l,n}(s)Φ.
    """
    rng = make_rng(rng)
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    L = np.atleast_1d(np.asarray(L, dtype=int))
    n = len(s)
    a = np.asarray(a, dtype=float)
    if len(a) != n or n > l:
        raise ValueError("need n <= l and len(a) == n")
    for j in range(n):
        nxt = s[j + 1] if j + 1 < n else -1.0
        if (s[j] - nxt).real < 1.0 - 1e-12:
            raise ValueError("frequency outside the convergence region Re(s_j - s_{j+1}) >= 1")
    if x is None:
        x = np.zeros((l, l))
        x[np.arange(n), np.arange(n)] = a
    num, den = [], []
    done = 0
    while done < samples:
        c = min(chunk, samples - done)
        k = haar_unitary(l, rng, size=c)[:, :n, :]
        y = k @ x @ np.conj(np.swapaxes(k, 1, 2))
        kp = k[:, :, :n]
        yp = kp @ np.conj(np.swapaxes(kp, 1, 2))
        num.append(_leading_minor_weights(y, s, L))
        den.append(_leading_minor_weights(yp, s, L))
        done += c
    num = np.concatenate(num)
    den = np.concatenate(den)
    nm, ne = _mean_and_stderr(num)
    dm, de = _mean_and_stderr(den)
    ratio = nm / dm
    resid = num - ratio * den
    rerr = math.sqrt(float(np.sum(np.abs(resid - resid.mean()) ** 2)) / max(samples - 1, 1) / samples) / abs(dm)
    return DefinitionEstimate(MCEstimate(ratio, rerr, samples), MCEstimate(nm, ne, samples),
                              MCEstimate(dm, de, samples))


# ---------------------------------------------------------------------------
# transforms

_TENSOR_DEFAULTS = {1: (1e-14, 0.25, 16), 2: (1e-12, 0.5, 12), 3: (1e-7, 1.5, 6)}


def _probe_radius(integrand, n: int, signs_list) -> float:
    """Radius beyond which |integrand|·∏|a| (the log-variable integrand) is negligible.

    Each coordinate is pushed out along a geometric grid while the others
    stay at moderate distinct values, which catches heavy one-sided tails.
    """
    grid = 2.0 ** np.arange(-10, 70)
    base = 1.0 + 0.13 * np.arange(n)
    best = 1.0
    for signs in signs_list:
        sg = np.asarray(signs, dtype=float)
        for b in range(n):
            pts = np.tile(base, (grid.size, 1))
            pts[:, b] = grid * (1.0 + 0.01 * b)
            pts *= sg[None, :]
            with np.errstate(all="ignore"):
                vals = np.abs(np.asarray(integrand(pts))) * np.prod(np.abs(pts), axis=1)
            vals = np.where(np.isfinite(vals), vals, 0.0)
            if np.max(vals) == 0:
                continue
            above = np.nonzero(vals > 1e-17 * np.max(vals))[0]
            best = max(best, 4.0 * grid[above[-1]])
    return float(best)


def _orthant_integral(integrand, n, signs_list, radius, breakpoints, lo, panel_width, order,
                      chunk=400000):
    total = 0.0 + 0j
    rules = []
    for b in range(n):
        # slightly different panels per axis avoid exact coincidences a_b = a_c
        rules.append(line_rule(radius, lo=lo, breakpoints=breakpoints, sides=(1,),
                               panel_width=panel_width * (1.0 - 0.07 * b), order=order))
    for signs in signs_list:
        grids = np.meshgrid(*[r[0] * sg for r, sg in zip(rules, signs)], indexing="ij")
        wts = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        w = np.prod(np.stack([x.ravel() for x in wts], axis=1), axis=1)
        for start in range(0, len(w), chunk):
            sl = slice(start, start + chunk)
            total += np.sum(integrand(pts[sl]) * w[sl])
    return total


def spherical_transform_phi(density: Callable[[np.ndarray], np.ndarray], s, L, support: str = "full",
                            radius: float | None = None, breakpoints=(), lo: float | None = None,
                            panel_width: float | None = None, order: int | None = None) -> complex:
    """∫_{Dₙ} p(a) Φ(s, L; a) da by tensor Gauss rules in ln|a_j| on each orthant.

    ``density`` maps an array of spectra (N, n) to values (N,).  With
    ``support="positive"`` only the positive orthant is integrated.
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    L = np.atleast_1d(np.asarray(L, dtype=int))
    n = len(s)
    signs_list = [(1,) * n] if support == "positive" else list(itertools.product((-1, 1), repeat=n))

    def integrand(pts):
        return np.asarray(density(pts)) * phi(s, L, pts)

    if radius is None:
        radius = _probe_radius(integrand, n, signs_list)
    # the tensor grid grows like (nodes per axis)^n: coarsen with dimension
    d_lo, d_width, d_order = _TENSOR_DEFAULTS.get(n, _TENSOR_DEFAULTS[3])
    lo = d_lo if lo is None else lo
    panel_width = d_width if panel_width is None else panel_width
    order = d_order if order is None else order

    return complex(_orthant_integral(integrand, n, signs_list, radius, breakpoints, lo, panel_width, order))


def spherical_transform_psi(density, s, **kw) -> complex:
    """∫_{Aₙ} p(a) Ψ(s; a) da (density on the positive orthant)."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    return spherical_transform_phi(density, s, np.zeros(len(s), dtype=int), support="positive", **kw)


def tabulated_transform_psi(density, n: int, radius: float | None = None, lo: float = 1e-12,
                            panel_width: float = 0.25, order: int = 12) -> Callable[[np.ndarray], np.ndarray]:
    """Ψ-transform of a density on the positive orthant for many frequencies at once (n ≤ 2).

    Expanding the determinant of Ψ gives
    S(s) = n! ∏j!/Δ(s) · ∫ (p/Δ)(a) ∏_b a_b^{s_b} da, a separable kernel, so
    one tensor Gauss rule in ln a serves every frequency: the frequency
    table is a product of two exponential matrices with the tabulated
    p/Δ.  Returns ``transform(freq)`` for ``freq`` of shape (N, n).
    """
    if n not in (1, 2):
        raise ValueError("tabulated transform is implemented for n <= 2")
    if radius is None:
        def probe(pts):
            return np.asarray(density(pts), dtype=float)
        radius = _probe_radius(probe, n, [(1,) * n])
    x, w = log_rule(lo, radius, (), panel_width, order)
    t = np.log(x)
    if n == 1:
        g = np.asarray(density(x[:, None]), dtype=float) * w

        def transform(freq):
            freq = np.atleast_2d(np.asarray(freq, dtype=complex))
            return np.exp(np.multiply.outer(freq[:, 0], t)) @ g

        return transform
    pts = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    dv = pts[:, 1] - pts[:, 0]
    vals = np.asarray(density(pts), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dv != 0, vals / np.where(dv != 0, dv, 1.0), 0.0)
    G = ratio.reshape(len(x), len(x)) * np.outer(w, w)
    pref = 2.0 * _factorial_prefactor(2)

    def transform(freq):
        freq = np.atleast_2d(np.asarray(freq, dtype=complex))
        u1, i1 = np.unique(freq[:, 0], return_inverse=True)
        u2, i2 = np.unique(freq[:, 1], return_inverse=True)
        table = np.exp(np.multiply.outer(u1, t)) @ G @ np.exp(np.multiply.outer(u2, t)).T
        return pref * table[i1, i2] / vandermonde(freq)

    return transform


def _inverse_spherical(transform, a, parities, norm_base, eps_schedule, cutoff, order_nodes=8):
    a = np.asarray(a, dtype=float)
    n = len(a)
    s0 = np.array([n - 1 - b for b in range(n)], dtype=float)
    ln_a = np.log(np.abs(a))
    sign = np.sign(a)

    def mag(S):
        worst = 0.0
        for L in parities:
            for b in range(n):
                pts = np.tile(s0.astype(complex), (2, 1))
                pts[0, b] += 1j * S
                pts[1, b] -= 1j * S
                worst = max(worst, float(np.max(np.abs(transform(pts, L)))))
        return worst

    peak = max(float(np.max(np.abs(transform(s0[None, :].astype(complex), L)))) for L in parities)
    S = cutoff or frequency_cutoff(mag, 1e-13 * max(peak, 1e-300), start=4.0, limit=512.0)
    width = min(0.5, 2.0 / max(1.0, float(np.max(np.abs(ln_a)))))
    x, w = gauss_panels(np.linspace(-S, S, int(math.ceil(2 * S / width)) + 1), order_nodes)
    grids = np.meshgrid(*([x] * n), indexing="ij")
    wgrids = np.meshgrid(*([w] * n), indexing="ij")
    sgrid = np.stack([g.ravel() for g in grids], axis=1)
    wt = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    freq = 1j * sgrid + s0[None, :]
    # exponent −i s_b − n + b − 1 with b = 1..n
    expo = -1j * sgrid + (-n + np.arange(1, n + 1) - 1)[None, :]
    base = np.zeros(len(wt), dtype=complex)
    dv = vandermonde(freq)
    for L in parities:
        sg = sign[None, :] ** np.asarray(L)[:, None]  # (b, c)
        mat = sg[None, :, :] * np.exp(expo[:, :, None] * ln_a[None, None, :])
        base += np.asarray(transform(freq, L)) * dv * np.linalg.det(mat)
    base *= wt
    eps = sorted(map(float, eps_schedule), reverse=True)
    estimates = []
    for e in eps:
        z = np.prod(zeta_regularizer(e * sgrid, n), axis=1)
        estimates.append(complex(np.sum(base * z)))
    pref = vandermonde(a) / (math.factorial(n) ** 2 * _factorial_prefactor(n) * norm_base**n)
    value, err = neville_zero([e * e for e in eps], estimates)
    return float((pref * value).real), abs(pref) * err


def inverse_spherical_phi(transform: Callable[[np.ndarray, tuple], np.ndarray], a, eps_schedule=DEFAULT_EPS,
                          cutoff: float | None = None, tolerance: float | None = None) -> float:
    """Recover p_D(a) from its Φ-transform (sum over all 2ⁿ parity vectors).

    ``transform(freq, L)`` receives complex frequencies of shape (N, n) on the
    shifted lines i s + s⁽ⁿ⁾ and a parity tuple.
    """
    n = len(np.atleast_1d(a))
    parities = list(itertools.product((0, 1), repeat=n))
    value, err = _inverse_spherical(transform, a, parities, 4 * math.pi, eps_schedule, cutoff)
    if tolerance is not None and err > tolerance:
        raise QuadratureError(f"epsilon extrapolation unstable (increment {err:.3g})")
    return value


def inverse_spherical_psi(transform, a, eps_schedule=DEFAULT_EPS, cutoff=None) -> float:
    """Recover p_A(a) on the positive orthant from its Ψ-transform."""
    n = len(np.atleast_1d(a))
    value, _ = _inverse_spherical(lambda f, L: transform(f), a, [(0,) * n], 2 * math.pi, eps_schedule, cutoff)
    return value


# ---------------------------------------------------------------------------
# factorisation

def _check_profiles(l, m, n1, n2):
    if not (1 <= n1 <= min(l, m)):
        raise ValueError("need 1 <= n1 <= min(l, m)")
    if not (1 <= n2 <= m):
        raise ValueError("need 1 <= n2 <= m")


def factorization_rhs(s, L, l: int, m: int, n1: int, n2: int, a_g, a_x) -> complex:
    """Right-hand side of the factorisation of ∫dk Φ(s, L; g k x k* g*).

    g is l×m of rank n1 with squared singular values ``a_g``; x is m×m
    Hermitian of rank n2 with eigenvalues ``a_x``; s, L have length
    r = min(n1, n2).  With d = |n1 − n2| the frequencies are extended as
    s̃ = (s + d, d−1, …, 0), L̃ = (L + d mod 2, mod₂(d−1), …, 0).
    """
    _check_profiles(l, m, n1, n2)
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    L = np.atleast_1d(np.asarray(L, dtype=int))
    r = min(n1, n2)
    d = abs(n1 - n2)
    if len(s) != r or len(L) != r or len(a_g) != n1 or len(a_x) != n2:
        raise ValueError("inconsistent lengths for the rank profile")
    std = standard_frequency(d)
    s_t = np.concatenate([s + d, np.asarray(std.s, dtype=complex)])
    L_t = np.concatenate([(L + d) % 2, np.asarray(std.L, dtype=int)])
    c = normalization_C(m, r + d, s_t)
    if n1 <= n2:
        return complex(c * psi(s, a_g) * phi(s_t, L_t, a_x))
    return complex(c * psi(s_t, a_g) * phi(s, L, a_x))


def factorization_lhs_mc(s, L, l: int, m: int, n1: int, n2: int, a_g, a_x, samples: int, rng,
                         chunk: int = 20000) -> MCEstimate:
    """Haar Monte Carlo of ∫_{K_m} dk Φ(s, L; g k x k* g*)."""
    _check_profiles(l, m, n1, n2)
    rng = make_rng(rng)
    r = min(n1, n2)
    root = np.sqrt(np.asarray(a_g, dtype=float))
    x = np.zeros((m, m))
    x[np.arange(n2), np.arange(n2)] = np.asarray(a_x, dtype=float)
    vals = []
    done = 0
    while done < samples:
        c = min(chunk, samples - done)
        k = haar_unitary(m, rng, size=c)[:, :n1, :]
        y = k @ x @ np.conj(np.swapaxes(k, 1, 2))
        y = root[None, :, None] * y * root[None, None, :]
        ev = top_abs(np.linalg.eigvalsh(y), r)
        vals.append(phi(s, L, ev))
        done += c
    mean, err = _mean_and_stderr(np.concatenate(vals))
    return MCEstimate(mean, err, samples)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankLimitResult:
    lhs: complex
    rhs: complex
    rel_diff: float
    wrong_order_value: complex

    @property
    def wrong_order_diverges(self) -> bool:
        """True when taking a_n → 0 before s_n → 0 misses the limit."""
        return not np.isclose(self.wrong_order_value, self.rhs, rtol=1e-2)


def rank_limit_check(s, a, m: int | None = None, L=None, small: float = 1e-6) -> RankLimitResult:
    """Compare C_{m,n}(s,0)·Φ((s,0),(L,0);(a,ε)) with C_{m,n−1}(s−1)·Φ(s−1, L−1; a).

    ``s``, ``a`` (and ``L``) hold the n−1 surviving entries; the n-th
    frequency and eigenvalue are both set to ``small``.  Without ``L`` the
    Ψ version is used (positive ``a``).
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    n = len(s) + 1
    if n < 2 or len(a) != n - 1:
        raise ValueError("need n >= 2 with n-1 surviving entries")
    m = n if m is None else m
    s_full = np.append(s, small)
    a_full = np.append(a, small)
    if L is None:
        lhs = normalization_C(m, n, s_full) * psi(s_full, a_full)
        rhs = normalization_C(m, n - 1, s - 1) * psi(s - 1, a)
        wrong = normalization_C(m, n, np.append(s, 1.0)) * psi(np.append(s, 1.0), a_full)
    else:
        L = np.atleast_1d(np.asarray(L, dtype=int))
        L_full = np.append(L, 0)
        lhs = normalization_C(m, n, s_full) * phi(s_full, L_full, a_full)
        rhs = normalization_C(m, n - 1, s - 1) * phi(s - 1, (L - 1) % 2, a)
        wrong = normalization_C(m, n, np.append(s, 1.0)) * phi(np.append(s, 1.0), L_full, a_full)
    rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    return RankLimitResult(complex(lhs), complex(rhs), float(rel), complex(wrong))
