"""Symmetric convex bodies in R^n represented by their norms.

A body is ``{alpha : norm(alpha) <= 1}``.  Supported kinds:

``lp``
    scaled (and optionally rotated) l_p ball, ``1 <= p <= inf``.
``ellipsoid``
    ``{a : a^T A a <= 1}`` for a symmetric positive-definite ``A``.
``induced``
    ``alpha -> ||J alpha||_{L_p}`` over a spectrum of eigenfunctions.
``section``
    a body intersected with a subspace, in the subspace's own coordinates.
``polar``
    the polar of another body, when no closed form is available.

Polars of ``lp`` and ``ellipsoid`` bodies and of their sections are closed
form; everything else goes through numerical support-function evaluation.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import HalfspaceIntersection
from scipy.special import gammaln

from flatpoly._rng import chunk_sizes, rng_for
from flatpoly.harmonics import SpectrumSelection
from flatpoly.norms import QuadratureRule, induced_norm, induced_norm_grad
from flatpoly.subspaces import Subspace

WITNESS_TOL = 1e-8
# l_1 sections have 2^n facets; above this the vertex route is skipped
MAX_VERTEX_AMBIENT = 12
DEFAULT_RESTARTS = 32


class NonConvergenceWarning(RuntimeWarning):
    pass


def conjugate(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def ball_volume(n: int) -> float:
    """Volume of the Euclidean unit ball, ``pi^(n/2) / Gamma(n/2 + 1)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0))


@dataclass(frozen=True, eq=False)
class NormBody:
    dim: int
    kind: str
    p: float = 2.0
    scale: float = 1.0
    frame: np.ndarray | None = None
    shape: np.ndarray | None = None
    spectrum: SpectrumSelection | None = None
    quad: QuadratureRule | None = None
    parent: "NormBody | None" = None
    basis: np.ndarray | None = None
    circumradius_hint: float | None = None

    # -- constructors -------------------------------------------------

    @classmethod
    def lp(cls, n: int, p: float, scale: float = 1.0, frame=None) -> "NormBody":
        if p < 1:
            raise ValueError("p must be >= 1")
        if frame is not None:
            frame = np.asarray(frame, dtype=float)
        return cls(n, "lp", p=float(p), scale=float(scale), frame=frame)

    @classmethod
    def euclidean(cls, n: int) -> "NormBody":
        return cls.lp(n, 2)

    @classmethod
    def ellipsoid(cls, shape) -> "NormBody":
        a = np.asarray(shape, dtype=float)
        a = 0.5 * (a + a.T)
        if np.linalg.eigvalsh(a).min() <= 0:
            raise ValueError("shape matrix must be positive definite")
        return cls(a.shape[0], "ellipsoid", shape=a)

    @classmethod
    def from_semi_axes(cls, axes, rotation=None) -> "NormBody":
        axes = np.asarray(axes, dtype=float)
        q = np.eye(len(axes)) if rotation is None else np.asarray(rotation, dtype=float)
        return cls.ellipsoid(q @ np.diag(axes ** -2.0) @ q.T)

    @classmethod
    def induced(cls, spectrum: SpectrumSelection, p: float, quad: QuadratureRule | None = None) -> "NormBody":
        return cls(spectrum.n, "induced", p=float(p), spectrum=spectrum, quad=quad)

    def scaled(self, c: float) -> "NormBody":
        """The body ``c * self``."""
        if c <= 0:
            raise ValueError("scale must be positive")
        if self.kind == "ellipsoid":
            return NormBody.ellipsoid(self.shape / c ** 2)
        hint = None if self.circumradius_hint is None else c * self.circumradius_hint
        return replace(self, scale=self.scale * c, circumradius_hint=hint)

    def section(self, L: Subspace) -> "NormBody":
        """``self & L`` written in the intrinsic coordinates of ``L``."""
        if L.ambient_dim != self.dim:
            raise ValueError("subspace ambient dimension does not match body")
        B = L.basis
        if self.kind == "ellipsoid":
            return NormBody.ellipsoid(B.T @ self.shape @ B)
        if self.kind == "lp" and self.p == 2 and self.frame is None:
            return NormBody.lp(L.dim, 2, self.scale)
        if self.kind == "lp" and L.dim == self.dim:
            frame = B if self.frame is None else self.frame @ B
            return NormBody.lp(self.dim, self.p, self.scale, frame)
        return NormBody(L.dim, "section", parent=self, basis=B)

    # -- geometry -----------------------------------------------------

    @property
    def circumradius(self) -> float:
        if self.circumradius_hint is not None:
            return self.circumradius_hint
        n, p = self.dim, self.p
        if self.kind == "lp":
            return self.scale * n ** max(0.0, 0.5 - 1.0 / p)
        if self.kind == "ellipsoid":
            return 1.0 / math.sqrt(np.linalg.eigvalsh(self.shape).min())
        if self.kind == "induced":
            # Nikolskii with constant 1: ||t||_2 <= n^(1/p - 1/2) ||t||_p for p < 2
            return self.scale * n ** max(0.0, 1.0 / p - 0.5)
        if self.kind == "section":
            return self.parent.circumradius
        if self.kind == "polar":
            return 1.0 / self.parent.inradius
        raise ValueError(f"no circumradius for kind {self.kind}")

    @property
    def inradius(self) -> float:
        n, p = self.dim, self.p
        if self.kind == "lp":
            return self.scale * n ** min(0.0, 0.5 - 1.0 / p)
        if self.kind == "ellipsoid":
            return 1.0 / math.sqrt(np.linalg.eigvalsh(self.shape).max())
        if self.kind == "induced":
            return self.scale * n ** min(0.0, 1.0 / p - 0.5)
        if self.kind == "section":
            return self.parent.inradius
        if self.kind == "polar":
            return 1.0 / self.parent.circumradius
        raise ValueError(f"no inradius for kind {self.kind}")

    @property
    def smooth(self) -> bool:
        if self.kind in ("lp", "induced"):
            return 1 < self.p < math.inf
        if self.kind == "section":
            return self.parent.smooth
        return self.kind == "ellipsoid"


def _check_dim(body: NormBody, alpha: np.ndarray) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)
    if a.shape[-1] != body.dim:
        raise ValueError(f"vector length {a.shape[-1]} does not match body dimension {body.dim}")
    return a


def norm(body: NormBody, alpha):
    """Norm of one vector (float) or of each row of a 2-D array."""
    a = _check_dim(body, alpha)
    k = body.kind
    if k == "lp":
        x = a if body.frame is None else a @ body.frame.T
        return np.linalg.norm(x, ord=body.p, axis=-1) / body.scale
    if k == "ellipsoid":
        q = np.einsum("...i,ij,...j->...", a, body.shape, a)
        return np.sqrt(np.maximum(q, 0.0))
    if k == "induced":
        return induced_norm(body.spectrum, a, body.p, body.quad) / body.scale
    if k == "section":
        return norm(body.parent, a @ body.basis.T)
    if k == "polar":
        return dual_norm(body.parent, a)
    raise ValueError(f"unknown body kind {k}")


def norm_grad(body: NormBody, alpha) -> np.ndarray:
    """Gradient of the norm at a nonzero vector (a subgradient where it is not smooth)."""
    a = _check_dim(body, alpha)
    k = body.kind
    if k == "lp":
        x = a if body.frame is None else body.frame @ a
        p = body.p
        if math.isinf(p):
            g = np.zeros_like(x)
            i = int(np.argmax(np.abs(x)))
            g[i] = np.sign(x[i])
        elif p == 1:
            g = np.sign(x)
        else:
            nx = np.linalg.norm(x, ord=p)
            g = np.sign(x) * (np.abs(x) / nx) ** (p - 1)
        g = g if body.frame is None else body.frame.T @ g
        return g / body.scale
    if k == "ellipsoid":
        v = body.shape @ a
        return v / math.sqrt(max(a @ v, 1e-300))
    if k == "induced":
        return induced_norm_grad(body.spectrum, a, body.p, body.quad) / body.scale
    if k == "section":
        return body.basis.T @ norm_grad(body.parent, body.basis @ a)
    raise ValueError(f"no gradient for kind {k}")


def dual_body(body: NormBody) -> NormBody:
    """The polar body ``V°``; closed form where one exists."""
    if body.kind == "lp":
        return NormBody.lp(body.dim, conjugate(body.p), 1.0 / body.scale, body.frame)
    if body.kind == "ellipsoid":
        return NormBody.ellipsoid(np.linalg.inv(body.shape))
    if body.kind == "polar":
        return body.parent
    return NormBody(body.dim, "polar", parent=body)


class DualNormEstimate(NamedTuple):
    value: float
    lower_bound: bool
    converged: bool


def _section_support(body: NormBody, u: np.ndarray) -> tuple[float, np.ndarray]:
    """``max <u, c>`` over the section body, with a maximizer.

    Linear programme for l_1 / l_inf parents, smooth convex minimization over
    the complement otherwise.
    """
    parent, B = body.parent, body.basis
    if parent.kind == "lp" and (parent.p == 1 or math.isinf(parent.p)):
        A = B if parent.frame is None else parent.frame @ B
        n, m = A.shape
        s = parent.scale
        if math.isinf(parent.p):
            res = linprog(-u, A_ub=np.vstack([A, -A]), b_ub=np.full(2 * n, s),
                          bounds=[(None, None)] * m, method="highs")
            c = res.x
        else:
            # variables (c, t), |A c| <= t, sum t <= s
            cost = np.concatenate([-u, np.zeros(n)])
            eye = np.eye(n)
            a_ub = np.vstack([
                np.hstack([A, -eye]),
                np.hstack([-A, -eye]),
                np.concatenate([np.zeros(m), np.ones(n)])[None, :],
            ])
            b_ub = np.concatenate([np.zeros(2 * n), [s]])
            res = linprog(cost, A_ub=a_ub, b_ub=b_ub,
                          bounds=[(None, None)] * m + [(0, None)] * n, method="highs")
            c = res.x[:m]
        if not res.success:
            raise RuntimeError(f"support LP failed: {res.message}")
        return float(u @ c), c
    # h(u) = min over z in L-perp of ||B u + N z||_{parent polar}
    polar = dual_body(parent)
    if polar.kind == "polar":
        raise NotImplementedError("support function of sections of this body kind")
    N = Subspace(B).complement_basis()
    base = B @ u
    if N.shape[1] == 0:
        return float(norm(polar, base)), None
    f = lambda z: norm(polar, base + N @ z)  # noqa: E731
    g = lambda z: N.T @ norm_grad(polar, base + N @ z)  # noqa: E731
    res = minimize(f, np.zeros(N.shape[1]), jac=g, method="BFGS", options={"gtol": 1e-12})
    return float(res.fun), None


def _section_vertices(body: NormBody) -> np.ndarray | None:
    """Vertices of a section of an l_1 / l_inf ball, or None when unavailable."""
    parent, B = body.parent, body.basis
    if parent.kind != "lp" or not (parent.p == 1 or math.isinf(parent.p)) or body.dim < 2:
        return None
    A = B if parent.frame is None else parent.frame @ B
    n = A.shape[0]
    if math.isinf(parent.p):
        normals = np.vstack([A, -A])
    elif n <= MAX_VERTEX_AMBIENT:
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
        normals = signs @ A
    else:
        return None
    # halfspaces a.c - scale <= 0 around the interior point 0
    halfspaces = np.hstack([normals, np.full((len(normals), 1), -parent.scale)])
    try:
        return HalfspaceIntersection(halfspaces, np.zeros(body.dim)).intersections
    except Exception:  # qhull precision failures fall back to the LP
        return None


def induced_dual_norm(body: NormBody, alpha, restarts: int = 4, maxiter: int = 200, seed: int = 0) -> DualNormEstimate:
    """Dual of an induced norm by multi-start ascent of ``<alpha, beta> / ||beta||``.

    The result is attained at a feasible ``beta`` so it is a lower bound.
    ``converged`` requires every restart's optimizer to report success or the
    best value to be reproduced by two restarts.
    """
    a = _check_dim(body, alpha)
    if not np.any(a):
        return DualNormEstimate(0.0, True, True)

    def f(b):
        nb = norm(body, b)
        return -(a @ b) / nb

    def g(b):
        nb = norm(body, b)
        return -(a / nb - (a @ b) * norm_grad(body, b) / nb ** 2)

    rng = rng_for(seed, 0xD0A1)
    values, ok = [], []
    for r in range(restarts):
        b0 = a.copy() if r == 0 else a + rng.standard_normal(a.shape) * np.linalg.norm(a) / math.sqrt(len(a))
        res = minimize(f, b0, jac=g, method="BFGS", options={"maxiter": maxiter})
        values.append(-float(res.fun))
        ok.append(bool(res.success))
    best = max(values)
    agree = sum(abs(v - best) <= 1e-6 * best for v in values) >= 2
    return DualNormEstimate(best, True, any(ok) or agree)


def dual_norm(body: NormBody, alpha):
    """``sup { |<alpha, beta>| : norm(beta) <= 1 }``.

    Closed form for l_p and ellipsoids (and their sections).  Sections of
    polyhedral balls use a max over the section's vertices (an LP per vector
    if vertex enumeration is unavailable); for induced bodies see
    :func:`induced_dual_norm` (a flagged lower bound; a warning is emitted if
    the ascent did not converge).
    """
    a = _check_dim(body, alpha)
    d = dual_body(body)
    if d.kind != "polar":
        return norm(d, a)
    rows = np.atleast_2d(a)
    if body.kind == "section" and body.dim == 1:
        # a segment [-r, r] with r = 1 / ||basis||
        out = np.abs(rows[:, 0]) / float(norm(body, np.ones(1)))
        return float(out[0]) if a.ndim == 1 else out
    if body.kind == "section":
        verts = _section_vertices(body)
        if verts is not None:
            out = np.max(rows @ verts.T, axis=1)
            return float(out[0]) if a.ndim == 1 else out
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        if body.kind == "section":
            out[i] = _section_support(body, row)[0]
        elif body.kind == "induced":
            est = induced_dual_norm(body, row)
            if not est.converged:
                warnings.warn("induced dual norm ascent did not converge", NonConvergenceWarning, stacklevel=2)
            out[i] = est.value
        else:
            raise NotImplementedError(f"dual norm of kind {body.kind}")
    return float(out[0]) if a.ndim == 1 else out


class VolumeEstimate(NamedTuple):
    value: float
    stderr: float
    samples: int


def mc_volume(body: NormBody, subspace: Subspace | None = None, samples: int = 100_000, seed: int = 0,
              offset=None) -> VolumeEstimate:
    """Hit-or-miss volume inside the circumscribed Euclidean ball.

    With ``subspace`` the estimate is the intrinsic volume of
    ``body & (offset + subspace)``; ``offset`` must be orthogonal to it.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    R = body.circumradius
    if not math.isfinite(R):
        raise ValueError("body has no finite circumradius")
    if subspace is None:
        k, B = body.dim, None
    else:
        if subspace.ambient_dim != body.dim:
            raise ValueError("subspace ambient dimension does not match body")
        k, B = subspace.dim, subspace.basis
    y = None if offset is None else np.asarray(offset, dtype=float)
    r2 = R * R
    if y is not None:
        if B is not None and np.linalg.norm(B.T @ y) > 1e-10 * max(1.0, np.linalg.norm(y)):
            raise ValueError("offset must be orthogonal to the subspace")
        r2 -= float(y @ y)
    if r2 <= 0:
        return VolumeEstimate(0.0, 0.0, samples)
    r = math.sqrt(r2)
    hits = 0
    for i, size in chunk_sizes(samples):
        rng = rng_for(seed, 0x7011, i)
        g = rng.standard_normal((size, k))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        pts = g * (r * rng.random(size) ** (1.0 / k))[:, None]
        if B is not None:
            pts = pts @ B.T
        if y is not None:
            pts = pts + y
        hits += int(np.count_nonzero(norm(body, pts) <= 1.0))
    frac = hits / samples
    total = ball_volume(k) * r ** k
    return VolumeEstimate(frac * total, total * math.sqrt(frac * (1 - frac) / samples), samples)


class SectionDiameter(NamedTuple):
    value: float
    witness: np.ndarray
    converged: bool


def _maximize_radius(sec: NormBody, restarts: int, seed: int) -> tuple[np.ndarray, list[float]]:
    """Maximize ``||c||_2 / norm(c)`` over the section; returns best direction and per-restart values."""
    m = sec.dim
    rng = rng_for(seed, 0xD1A)
    best_c, vals = None, []
    polyhedral = (sec.kind == "section" and sec.parent.kind == "lp"
                  and (sec.parent.p == 1 or math.isinf(sec.parent.p)))
    for _ in range(restarts):
        c = rng.standard_normal(m)
        if polyhedral:
            # support-point iteration: ||c|| increases monotonically, ends at a vertex
            c = c / norm(sec, c)
            for _ in range(200):
                _, nxt = _section_support(sec, c)
                if np.linalg.norm(nxt) <= np.linalg.norm(c) * (1 + 1e-13):
                    break
                c = nxt
        else:
            f = lambda v: norm(sec, v) / np.linalg.norm(v)  # noqa: E731

            def g(v):
                nv = np.linalg.norm(v)
                return norm_grad(sec, v) / nv - norm(sec, v) * v / nv ** 3

            res = minimize(f, c, jac=g, method="BFGS", options={"gtol": 1e-12, "maxiter": 2000})
            c = res.x
            if not sec.smooth and m <= 12:
                res = minimize(f, c, method="Nelder-Mead",
                               options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000})
                c = res.x
        val = float(np.linalg.norm(c) / norm(sec, c))
        if not vals or val > max(vals):
            best_c = c
        vals.append(val)
    return best_c, vals


def diameter_of_section(body: NormBody, L: Subspace, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> SectionDiameter:
    """``2 max { ||a||_2 : a in L, norm(a) <= 1 }`` and a witness on the boundary.

    Exact for ellipsoids (smallest eigenvalue of the restricted form) and for
    full-dimensional l_p balls; multi-start search otherwise.
    """
    sec = body.section(L)
    B = L.basis
    if sec.kind == "ellipsoid":
        w, v = np.linalg.eigh(sec.shape)
        c = v[:, 0] / math.sqrt(w[0])
        return SectionDiameter(2.0 / math.sqrt(w[0]), B @ c, True)
    if sec.kind == "lp":
        n, p = sec.dim, sec.p
        if p >= 2:
            x = np.full(n, sec.scale * n ** (-1.0 / p) if math.isfinite(p) else sec.scale)
        else:
            x = np.zeros(n)
            x[0] = sec.scale
        c = x if sec.frame is None else sec.frame.T @ x
        return SectionDiameter(2.0 * float(np.linalg.norm(x)), B @ c, True)
    c, vals = _maximize_radius(sec, restarts, seed)
    best = max(vals)
    agree = sum(abs(v - best) <= 1e-6 * best for v in vals) >= min(2, restarts)
    witness = B @ (c / norm(sec, c))
    return SectionDiameter(2.0 * best, witness, agree)
