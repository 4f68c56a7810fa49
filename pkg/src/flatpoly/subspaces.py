"""Linear subspaces of coefficient space, stored by orthonormal bases."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from flatpoly._rng import rng_for


@dataclass(frozen=True, eq=False)
class Subspace:
    """Column-orthonormal ``basis`` (n x s) of an s-dimensional subspace of R^n."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[1] == 0 or b.shape[1] > b.shape[0]:
            raise ValueError(f"basis must be n x s with 1 <= s <= n, got {b.shape}")
        err = np.abs(b.T @ b - np.eye(b.shape[1])).max()
        if err > 1e-10:
            raise ValueError(f"basis is not orthonormal (error {err:.2e})")
        object.__setattr__(self, "basis", b)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n))

    @classmethod
    def span(cls, vectors) -> "Subspace":
        """Orthonormalize the columns of ``vectors`` (n x k, full column rank)."""
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        q, r = np.linalg.qr(v)
        if np.min(np.abs(np.diag(r))) < 1e-12 * max(1.0, np.abs(r).max()):
            raise ValueError("vectors are linearly dependent")
        return cls(q)

    def embed(self, coords: np.ndarray) -> np.ndarray:
        """Map intrinsic coordinates (rows or a vector) to R^n."""
        return np.asarray(coords) @ self.basis.T

    def coords(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.basis

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.embed(self.coords(x))

    def residual(self, x: np.ndarray) -> float:
        """Euclidean distance from ``x`` to the subspace."""
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)))

    def complement_basis(self) -> np.ndarray:
        if self.dim == self.ambient_dim:
            return np.zeros((self.ambient_dim, 0))
        return null_space(self.basis.T)

    def contains(self, other: "Subspace", tol: float = 1e-8) -> bool:
        return all(self.residual(v) <= tol for v in other.basis.T)


def random_subspace(n: int, s: int, seed: int) -> Subspace:
    """Haar-distributed s-dimensional subspace: QR of a Gaussian matrix with
    the sign of ``diag(R)`` fixed so the frame itself is Haar on the Stiefel manifold."""
    if not 1 <= s <= n:
        raise ValueError(f"need 1 <= s <= n, got s={s}, n={n}")
    g = rng_for(seed, 0x5B5).standard_normal((n, s))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    return Subspace(q)


class IntersectionResult:
    """Orthonormal basis of ``L1 & L2`` plus rank diagnostics."""

    def __init__(self, subspace, singular_values, threshold, degenerate):
        self.subspace = subspace
        self.singular_values = singular_values
        self.threshold = threshold
        self.degenerate = degenerate

    @property
    def dim(self) -> int:
        return 0 if self.subspace is None else self.subspace.dim


def intersect(a: Subspace, b: Subspace, rel_tol: float = 1e-10, degenerate_tol: float = 1e-8) -> IntersectionResult:
    """Null space of the stacked orthogonal complements of ``a`` and ``b``.

    Singular values below ``rel_tol * max`` count as zero.  The result is
    flagged degenerate when the smallest retained singular value is below
    ``degenerate_tol`` (the rank decision is fragile).
    """
    if a.ambient_dim != b.ambient_dim:
        raise ValueError("subspaces live in different ambient spaces")
    n = a.ambient_dim
    stacked = np.vstack([a.complement_basis().T, b.complement_basis().T])
    if stacked.shape[0] == 0:
        return IntersectionResult(Subspace(np.eye(n)), np.zeros(0), 0.0, False)
    _, sv, vt = np.linalg.svd(stacked, full_matrices=True)
    threshold = rel_tol * (sv.max() if sv.size else 1.0)
    rank = int(np.sum(sv > threshold))
    retained = sv[:rank]
    degenerate = bool(retained.size and retained.min() < degenerate_tol)
    kernel = vt[rank:].T
    if kernel.shape[1] == 0:
        return IntersectionResult(None, sv, threshold, degenerate)
    q, _ = np.linalg.qr(kernel)
    return IntersectionResult(Subspace(q), sv, threshold, degenerate)
