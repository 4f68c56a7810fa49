"""Quadrature-backed L_p norms of polynomials and the induced coefficient norms.

A polynomial is a coefficient vector ``alpha`` over a :class:`SpectrumSelection`;
its function is ``J alpha = sum_k alpha_k xi_k``.  Norms are taken with respect
to the normalized invariant measure.

Even-integer ``p`` is computed exactly (``|t|^p`` is itself a polynomial of
degree ``p * deg``); other finite ``p`` use an oversampled grid; ``p = inf``
uses a grid search with local Newton refinement, which can only under-estimate
the true maximum.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from flatpoly._rng import rng_for
from flatpoly.harmonics import OrthonormalSystem, SpectrumSelection, kernel

APPROX_DENSITY = 8
LINF_DENSITY = 4


class InsufficientQuadrature(ValueError):
    pass


@dataclass(eq=False, frozen=True)
class QuadratureRule:
    """Nodes and weights for the normalized measure.

    ``exactness`` is the per-coordinate trigonometric degree (tori) or total
    spherical-harmonic degree (sphere) integrated exactly.  ``spacing`` is the
    largest node gap per coordinate, used for L-infinity uncertainty bounds.
    """

    manifold: str
    nodes: np.ndarray
    weights: np.ndarray
    exactness: int
    spacing: tuple[float, ...]

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return values @ self.weights

    def __len__(self):
        return len(self.weights)


def torus_rule(d: int, nodes_per_dim: int) -> QuadratureRule:
    """Uniform tensor grid on the d-torus; exact for trigonometric degree ``N - 1``."""
    grid = 2 * np.pi * np.arange(nodes_per_dim) / nodes_per_dim
    mesh = np.meshgrid(*([grid] * d), indexing="ij")
    nodes = np.column_stack([m.ravel() for m in mesh])
    weights = np.full(len(nodes), 1.0 / len(nodes))
    name = "torus1" if d == 1 else "torus"
    return QuadratureRule(name, nodes, weights, nodes_per_dim - 1, (2 * np.pi / nodes_per_dim,) * d)


def sphere_rule(n_theta: int, n_phi: int) -> QuadratureRule:
    """Gauss-Legendre in ``cos(theta)`` times a uniform longitude grid."""
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)[::-1]
    w = w[::-1]
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    nodes = np.column_stack([tt.ravel(), pp.ravel()])
    weights = np.outer(w / 2.0, np.full(n_phi, 1.0 / n_phi)).ravel()
    gaps = np.diff(np.concatenate([[-theta[0]], theta, [2 * np.pi - theta[-1]]]))
    exact = min(2 * n_theta - 1, n_phi - 1)
    return QuadratureRule("sphere2", nodes, weights, exact, (float(gaps.max()), 2 * np.pi / n_phi))


def exact_rule(system: OrthonormalSystem, degree: int) -> QuadratureRule:
    """Smallest rule of the standard family that is exact up to ``degree``."""
    degree = max(int(degree), 0)
    if system.is_torus:
        return torus_rule(system.d, degree + 1)
    return sphere_rule(degree // 2 + 1, degree + 1)


def oversampled_rule(system: OrthonormalSystem, degree: int, density: int) -> QuadratureRule:
    """``density`` times the resolution needed for products of degree-``degree`` functions."""
    if system.is_torus:
        return torus_rule(system.d, density * (2 * degree + 1))
    return sphere_rule(density * (degree + 1), density * (2 * degree + 1))


@lru_cache(maxsize=64)
def _cached_rule(system: OrthonormalSystem, kind: str, degree: int, density: int) -> QuadratureRule:
    if kind == "exact":
        return exact_rule(system, degree)
    return oversampled_rule(system, degree, density)


def _is_even_integer(p: float) -> bool:
    return math.isfinite(p) and float(p).is_integer() and int(p) % 2 == 0


def default_rule(spectrum: SpectrumSelection, p: float) -> QuadratureRule:
    """Exact rule for even ``p``; an ``APPROX_DENSITY``-oversampled grid otherwise."""
    deg = spectrum.degree
    if _is_even_integer(p):
        return _cached_rule(spectrum.system, "exact", int(p) * deg, 0)
    if math.isinf(p):
        return _cached_rule(spectrum.system, "grid", deg, LINF_DENSITY)
    return _cached_rule(spectrum.system, "grid", deg, APPROX_DENSITY)


@lru_cache(maxsize=32)
def design_at(spectrum: SpectrumSelection, quad: QuadratureRule) -> np.ndarray:
    """Basis values at the rule's nodes, shape ``(nodes, n)``."""
    phi = spectrum.design(quad.nodes)
    phi.setflags(write=False)
    return phi


@dataclass(frozen=True, eq=False)
class Polynomial:
    """``J alpha`` for a coefficient vector over a spectrum."""

    spectrum: SpectrumSelection
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.spectrum.n,):
            raise ValueError(f"expected {self.spectrum.n} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def __call__(self, x) -> np.ndarray:
        return self.spectrum.design(x) @ self.coeffs


def _check_rule(spectrum: SpectrumSelection, p: float, quad: QuadratureRule) -> None:
    if _is_even_integer(p) and quad.exactness < int(p) * spectrum.degree:
        raise InsufficientQuadrature(
            f"p={p} needs exactness {int(p) * spectrum.degree}, rule has {quad.exactness}"
        )


def _lp_from_values(values: np.ndarray, p: float, weights: np.ndarray) -> np.ndarray:
    a = np.abs(values)
    if p == 1:
        return a @ weights
    if p == 2:
        return np.sqrt(np.maximum((a * a) @ weights, 0.0))
    # rescale by the row max to keep |t|^p finite for large p
    scale = a.max(axis=-1, keepdims=True)
    scale[scale == 0] = 1.0
    return scale[..., 0] * (((a / scale) ** p) @ weights) ** (1.0 / p)


def lp_norm(poly: Polynomial, p: float, quad: QuadratureRule | None = None) -> float:
    """``(sum_i w_i |t(x_i)|^p)^(1/p)`` for finite ``p >= 1``."""
    if not 1 <= p < math.inf:
        raise ValueError("lp_norm needs 1 <= p < inf; use linf_norm for the sup norm")
    quad = quad or default_rule(poly.spectrum, p)
    _check_rule(poly.spectrum, p, quad)
    values = design_at(poly.spectrum, quad) @ poly.coeffs
    return float(_lp_from_values(values[None, :], p, quad.weights)[0])


class LinfEstimate(NamedTuple):
    """Lower bound ``value`` and grid-based upper bound ``upper`` for a sup norm."""

    value: np.ndarray | float
    upper: np.ndarray | float


def _grid_slack(spectrum: SpectrumSelection, quad: QuadratureRule) -> float:
    """Relative gap ``kappa`` with ``max|t| <= grid max / (1 - kappa)`` (Bernstein)."""
    deg = spectrum.degree
    if spectrum.system.is_torus:
        return deg * sum(h / 2 for h in quad.spacing)
    return deg * math.hypot(quad.spacing[0] / 2, quad.spacing[1] / 2)


def _stencil(dim: int) -> np.ndarray:
    return np.array(list(itertools.product((-1, 0, 1), repeat=dim)), dtype=float)


def _refine(spectrum, coeffs, start_pts, steps, spacing, sphere):
    """Damped Newton ascent of ``|t|`` around candidate points.

    Each round evaluates a ``3^dim`` finite-difference stencil of half-width
    ``h`` (per point and coordinate), takes the Newton step of the fitted
    quadratic when it is concave, and keeps the best evaluated point; ``h``
    then shrinks to the size of the move.  coeffs (S, n); start_pts
    (S, k, dim).  Returns best |t| per row, always attained at an evaluated
    point.
    """
    S, k, dim = start_pts.shape
    pts = start_pts.copy()
    h = np.broadcast_to(np.array(spacing, dtype=float) / 2.0, pts.shape).copy()
    offs = _stencil(dim)  # (m, dim)
    center = int(np.flatnonzero(np.all(offs == 0, axis=1))[0])
    idx = {tuple(o): i for i, o in enumerate(offs.astype(int))}

    def clip(p):
        if sphere:
            np.clip(p[..., 0], 0.0, np.pi, out=p[..., 0])
        return p

    def values(trial):
        phi = spectrum.design(trial.reshape(-1, dim)).reshape(S, -1, coeffs.shape[1])
        return np.abs(np.einsum("skn,sn->sk", phi, coeffs)).reshape(trial.shape[:-1])

    best = None
    eye = np.eye(dim)
    for _ in range(steps):
        trial = clip(pts[:, :, None, :] + offs[None, None] * h[:, :, None, :])
        f = values(trial)  # (S, k, m)
        f0 = f[..., center]
        grad = np.empty(pts.shape)
        hess = np.empty(pts.shape + (dim,))
        for c in range(dim):
            fp, fm = f[..., idx[tuple(eye[c].astype(int))]], f[..., idx[tuple(-eye[c].astype(int))]]
            grad[..., c] = (fp - fm) / (2 * h[..., c])
            hess[..., c, c] = (fp - 2 * f0 + fm) / h[..., c] ** 2
            for d in range(c + 1, dim):
                e = eye[c] + eye[d]
                g = eye[c] - eye[d]
                mixed = (f[..., idx[tuple(e.astype(int))]] - f[..., idx[tuple(g.astype(int))]]
                         - f[..., idx[tuple(-g.astype(int))]] + f[..., idx[tuple(-e.astype(int))]])
                hess[..., c, d] = hess[..., d, c] = mixed / (4 * h[..., c] * h[..., d])
        concave = np.all(np.linalg.eigvalsh(hess) < 0, axis=-1)
        safe = np.where(concave[..., None, None], hess, -np.eye(dim))
        step = -np.linalg.solve(safe, grad[..., None])[..., 0]
        step = np.where(concave[..., None], np.clip(step, -2 * h, 2 * h), 0.0)
        newton = clip(pts + step)
        fn = values(newton[:, :, None, :])[:, :, 0]
        cand = np.concatenate([f, fn[..., None]], axis=2)
        cand_pts = np.concatenate([trial, newton[:, :, None, :]], axis=2)
        arg = cand.argmax(axis=2)
        new_pts = np.take_along_axis(cand_pts, arg[:, :, None, None], axis=2)[:, :, 0, :]
        top = np.take_along_axis(cand, arg[:, :, None], axis=2)[:, :, 0]
        best = top.max(axis=1) if best is None else np.maximum(best, top.max(axis=1))
        moved = np.abs(new_pts - pts)
        h = np.clip(moved, h / 16.0, h)
        pts = new_pts
    return best


def linf_estimate(
    spectrum: SpectrumSelection,
    coeffs,
    grid_density: int = LINF_DENSITY,
    refine_steps: int = 3,
    candidates: int = 3,
    chunk: int = 512,
) -> LinfEstimate:
    """Sup norm of ``J alpha`` for one or many coefficient vectors.

    Grid maximum on ``grid_density`` times the spectral resolution, then
    ``refine_steps`` rounds of Newton refinement around the ``candidates`` best
    grid nodes.  ``value`` is attained at an actual point, hence a lower bound.
    """
    if grid_density < LINF_DENSITY:
        raise ValueError(f"grid_density must be at least {LINF_DENSITY}")
    c = np.asarray(coeffs, dtype=float)
    single = c.ndim == 1
    c = np.atleast_2d(c)
    if c.shape[1] != spectrum.n:
        raise ValueError(f"expected {spectrum.n} coefficients, got {c.shape[1]}")
    quad = _cached_rule(spectrum.system, "grid", spectrum.degree, grid_density)
    phi = design_at(spectrum, quad)
    kappa = _grid_slack(spectrum, quad)
    lower = np.empty(len(c))
    grid_max = np.empty(len(c))
    k = min(candidates, len(quad))
    for start in range(0, len(c), chunk):
        block = c[start:start + chunk]
        vals = np.abs(block @ phi.T)
        top = np.argpartition(-vals, k - 1, axis=1)[:, :k]
        gmax = np.take_along_axis(vals, top, axis=1).max(axis=1)
        grid_max[start:start + chunk] = gmax
        if refine_steps > 0 and spectrum.degree > 0:
            ref = _refine(spectrum, block, quad.nodes[top], refine_steps, quad.spacing,
                          not spectrum.system.is_torus)
            lower[start:start + chunk] = np.maximum(gmax, ref)
        else:
            lower[start:start + chunk] = gmax
    upper = grid_max / (1.0 - kappa) if kappa < 1 else np.full_like(grid_max, np.inf)
    upper = np.maximum(upper, lower)
    if single:
        return LinfEstimate(float(lower[0]), float(upper[0]))
    return LinfEstimate(lower, upper)


def linf_norm(poly: Polynomial, grid_density: int = LINF_DENSITY, refine_steps: int = 3) -> float:
    return float(linf_estimate(poly.spectrum, poly.coeffs, grid_density, refine_steps).value)


def induced_norm(spectrum: SpectrumSelection, alpha, p: float, quad: QuadratureRule | None = None):
    """``||J alpha||_{L_p}``; ``alpha`` may be one vector or a stack of rows."""
    a = np.asarray(alpha, dtype=float)
    if a.shape[-1] != spectrum.n:
        raise ValueError(f"expected {spectrum.n} coefficients, got {a.shape[-1]}")
    if math.isinf(p):
        return linf_estimate(spectrum, a).value
    if p < 1:
        raise ValueError("p must be >= 1")
    quad = quad or default_rule(spectrum, p)
    _check_rule(spectrum, p, quad)
    phi = design_at(spectrum, quad)
    single = a.ndim == 1
    rows = np.atleast_2d(a)
    out = np.empty(len(rows))
    for start in range(0, len(rows), 1024):
        vals = rows[start:start + 1024] @ phi.T
        out[start:start + 1024] = _lp_from_values(vals, p, quad.weights)
    return float(out[0]) if single else out


def lp_error_budget(spectrum: SpectrumSelection, alpha, p: float):
    """Quadrature error estimate for ``induced_norm`` at finite ``p``.

    Zero for even integers (exact rule).  Otherwise the change when the
    oversampled grid is refined twofold, which tracks the leading error term.
    """
    if math.isinf(p) or _is_even_integer(p):
        return 0.0 if np.ndim(alpha) == 1 else np.zeros(len(alpha))
    fine = _cached_rule(spectrum.system, "grid", spectrum.degree, 2 * APPROX_DENSITY)
    return np.abs(induced_norm(spectrum, alpha, p) - induced_norm(spectrum, alpha, p, fine))


def induced_norm_grad(spectrum: SpectrumSelection, alpha, p: float, quad: QuadratureRule | None = None):
    """Gradient (subgradient for p in {1, inf}) of ``alpha -> ||J alpha||_p``.

    For ``p = inf`` the subgradient is taken at the largest node of the L-inf grid.
    """
    a = np.asarray(alpha, dtype=float)
    if math.isinf(p):
        quad = _cached_rule(spectrum.system, "grid", spectrum.degree, LINF_DENSITY)
        phi = design_at(spectrum, quad)
        vals = phi @ a
        i = int(np.argmax(np.abs(vals)))
        return np.sign(vals[i]) * phi[i]
    quad = quad or default_rule(spectrum, p)
    phi = design_at(spectrum, quad)
    vals = phi @ a
    norm = float(_lp_from_values(vals[None, :], p, quad.weights)[0])
    if norm == 0:
        return np.zeros_like(a)
    g = quad.weights * np.sign(vals) * (np.abs(vals) / norm) ** (p - 1)
    return phi.T @ g


class NikolskiiResult(NamedTuple):
    """``max_ratio`` is over the random draws; the kernel column is reported apart."""

    max_ratio: float
    bound: float
    passed: bool
    kernel_ratio: float


def nikolskii_bound(n: int, p: float, q: float) -> float:
    """``n ** (1/q - 1/p)_+`` bound on ``||t||_p / ||t||_q`` (constant 1)."""
    inv = lambda r: 0.0 if math.isinf(r) else 1.0 / r  # noqa: E731
    return float(n) ** max(inv(q) - inv(p), 0.0)


def kernel_column(spectrum: SpectrumSelection, x0=None) -> np.ndarray:
    """Coefficients of ``K_n(., x0)``; ``x0`` defaults to the origin / north pole."""
    if x0 is None:
        x0 = np.zeros((1, spectrum.system.d))
    return spectrum.design(x0)[0]


def nikolskii_check(spectrum: SpectrumSelection, p: float, q: float, trials: int = 1000, seed: int = 0,
                    tol: float = 1e-9) -> NikolskiiResult:
    """Largest ``||t||_p / ||t||_q`` over Gaussian random polynomials vs ``n^(1/q-1/p)_+``."""
    rng = rng_for(seed, 0x4E1C)
    alphas = rng.standard_normal((trials, spectrum.n))
    ratios = induced_norm(spectrum, alphas, p) / induced_norm(spectrum, alphas, q)
    col = kernel_column(spectrum)
    kratio = float(induced_norm(spectrum, col, p) / induced_norm(spectrum, col, q))
    bound = nikolskii_bound(spectrum.n, p, q)
    max_ratio = float(ratios.max())
    passed = max(max_ratio, kratio) <= bound * (1 + tol)
    return NikolskiiResult(max_ratio, bound, passed, kratio)


def check_kernel_identity(spectrum: SpectrumSelection, x) -> float:
    """Max deviation of ``K_n(x, x)`` from ``n``."""
    return float(np.max(np.abs(kernel(spectrum, x, x) - spectrum.n)))
