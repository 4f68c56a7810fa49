"""Closed-form Laplace-Beltrami eigenfunction systems.

Three model manifolds are supported, each with the normalized invariant
measure:

* ``torus1`` - the circle, blocks ``{1}``, ``{sqrt2 cos kx, sqrt2 sin kx}``;
* ``torus`` with ``d <= 3`` - blocks grouped by ``|k|^2`` so every block is a
  full eigenspace;
* ``sphere2`` - real spherical harmonics of degree ``l`` (``2l + 1`` functions).

All bases are real and orthonormal in ``L2(nu)``.  Points are angle arrays:
shape ``(N, d)`` on tori (``(N,)`` accepted on the circle) and ``(N, 2)``
holding ``(colatitude, longitude)`` on the sphere.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

SPHERE_MAX_DEGREE = 64
SQRT2 = math.sqrt(2.0)

MANIFOLDS = ("torus1", "torus", "sphere2")


@dataclass(frozen=True)
class Block:
    """One eigenspace ``H_j``."""

    index: int
    eigenvalue: float
    dim: int
    # torus: representative frequencies (one per +-k pair), shape (dim//2, d)
    frequencies: np.ndarray | None = None
    # sphere: harmonic degree
    degree: int = 0

    @property
    def max_frequency(self) -> int:
        """Largest per-coordinate frequency (torus) or the degree (sphere)."""
        if self.frequencies is None:
            return self.degree
        if len(self.frequencies) == 0:
            return 0
        return int(np.abs(self.frequencies).max())


def _sums_of_squares(d: int, limit: int):
    """Map r -> sorted list of half-lattice representatives with |k|^2 = r."""
    bound = math.isqrt(limit)
    out: dict[int, list[tuple[int, ...]]] = {}
    for k in itertools.product(range(-bound, bound + 1), repeat=d):
        r = sum(c * c for c in k)
        if r == 0 or r > limit:
            continue
        first = next(c for c in k if c != 0)
        if first > 0:
            out.setdefault(r, []).append(k)
    return {r: sorted(v) for r, v in sorted(out.items())}


@dataclass(eq=False)
class OrthonormalSystem:
    """Eigenspace-blocked orthonormal family on a model manifold.

    ``class_k_constant`` is the constant ``C`` of the pointwise block bound
    ``sum_k |xi_k(x)|^2 <= C d_j``; it is 1 for every system built here.
    """

    manifold: str
    d: int = 1
    class_k_constant: float = 1.0
    _blocks: list[Block] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.manifold not in MANIFOLDS:
            raise ValueError(f"unknown manifold {self.manifold!r}")
        if self.manifold == "torus1":
            self.d = 1
        elif self.manifold == "sphere2":
            self.d = 2
        elif not 1 <= self.d <= 3:
            raise ValueError("torus dimension must be 1, 2 or 3")

    @classmethod
    def torus1(cls) -> "OrthonormalSystem":
        return cls("torus1")

    @classmethod
    def torus(cls, d: int) -> "OrthonormalSystem":
        return cls("torus1") if d == 1 else cls("torus", d=d)

    @classmethod
    def sphere2(cls) -> "OrthonormalSystem":
        return cls("sphere2")

    @property
    def point_dim(self) -> int:
        return self.d

    @property
    def is_torus(self) -> bool:
        return self.manifold != "sphere2"

    def block(self, j: int) -> Block:
        if j < 0:
            raise IndexError(f"block index {j} out of range")
        if self.manifold == "sphere2" and j > SPHERE_MAX_DEGREE:
            raise IndexError(f"sphere degree {j} exceeds cap {SPHERE_MAX_DEGREE}")
        self._extend(j + 1)
        return self._blocks[j]

    def blocks(self, count: int) -> list[Block]:
        return [self.block(j) for j in range(count)]

    def _extend(self, count: int) -> None:
        if len(self._blocks) >= count:
            return
        if self.manifold == "sphere2":
            for ell in range(len(self._blocks), count):
                self._blocks.append(Block(ell, float(ell * (ell + 1)), 2 * ell + 1, degree=ell))
            return
        # torus: regenerate with a radius large enough to hold `count` shells
        limit = max(4, count)
        while True:
            shells = _sums_of_squares(self.d, limit)
            if len(shells) + 1 >= count:
                break
            limit *= 2
        blocks = [Block(0, 0.0, 1, frequencies=np.zeros((0, self.d), dtype=int))]
        for j, (r, reps) in enumerate(shells.items(), start=1):
            blocks.append(Block(j, float(r), 2 * len(reps), frequencies=np.array(reps, dtype=int)))
            if len(blocks) >= count:
                break
        self._blocks = blocks

    def random_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Points distributed by the normalized invariant measure."""
        if self.is_torus:
            return rng.uniform(0.0, 2 * np.pi, size=(count, self.d))
        theta = np.arccos(rng.uniform(-1.0, 1.0, size=count))
        phi = rng.uniform(0.0, 2 * np.pi, size=count)
        return np.column_stack([theta, phi])

    def as_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1, 1)
        elif x.ndim == 1:
            x = x.reshape(-1, 1) if self.d == 1 else x.reshape(1, -1)
        if x.shape[1] != self.d:
            raise ValueError(f"points must have {self.d} coordinates, got shape {x.shape}")
        return x


def _torus_block_values(block: Block, x: np.ndarray) -> np.ndarray:
    if block.dim == 1 and len(block.frequencies) == 0:
        return np.ones((x.shape[0], 1))
    phase = x @ block.frequencies.T  # (N, pairs)
    out = np.empty((x.shape[0], block.dim))
    out[:, 0::2] = SQRT2 * np.cos(phase)
    out[:, 1::2] = SQRT2 * np.sin(phase)
    return out


def _sphere_columns(degrees: list[int], x: np.ndarray) -> dict[int, np.ndarray]:
    """Real spherical harmonics for the listed degrees, normalized so that
    ``mean over the sphere of Y^2`` is 1.  Columns per degree are ordered
    ``P_l0, P_l1 cos, P_l1 sin, ..., P_ll cos, P_ll sin``."""
    theta, phi = x[:, 0], x[:, 1]
    t, u = np.cos(theta), np.sin(theta)
    lmax = max(degrees)
    wanted = set(degrees)
    out = {ell: np.empty((x.shape[0], 2 * ell + 1)) for ell in wanted}
    pmm = np.ones_like(t)
    for m in range(lmax + 1):
        if m == 1:
            pmm = math.sqrt(3.0) * u
        elif m > 1:
            pmm = math.sqrt((2 * m + 1) / (2 * m)) * u * pmm
        if m == 0:
            trig = None
        else:
            trig = (np.cos(m * phi), np.sin(m * phi))
        p_prev2, p_prev = None, pmm
        for ell in range(m, lmax + 1):
            if ell == m:
                p = pmm
            elif ell == m + 1:
                p = math.sqrt(2 * m + 3) * t * pmm
            else:
                a = math.sqrt((2 * ell - 1) * (2 * ell + 1) / ((ell - m) * (ell + m)))
                b = math.sqrt(
                    (2 * ell + 1) * (ell + m - 1) * (ell - m - 1)
                    / ((ell - m) * (ell + m) * (2 * ell - 3))
                )
                p = a * t * p_prev - b * p_prev2
            if ell > m:
                p_prev2, p_prev = p_prev, p
            if ell in wanted:
                cols = out[ell]
                if m == 0:
                    cols[:, 0] = p
                else:
                    cols[:, 2 * m - 1] = p * trig[0]
                    cols[:, 2 * m] = p * trig[1]
    return out


def evaluate_block(system: OrthonormalSystem, j: int, x) -> np.ndarray:
    """Values of the orthonormal basis of block ``j`` at points ``x``.

    Returns an ``(N, d_j)`` array (``N`` = number of points).
    """
    block = system.block(j)
    pts = system.as_points(x)
    if system.is_torus:
        return _torus_block_values(block, pts)
    return _sphere_columns([block.degree], pts)[block.degree]


@dataclass(eq=False)
class SpectrumSelection:
    """A set of eigenspace blocks and the coordinate map ``alpha -> J alpha``.

    Coefficient slot ``i`` corresponds to ``index_map[i] = (block, position)``.
    """

    system: OrthonormalSystem
    block_indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(j) for j in self.block_indices)
        if not idx:
            raise ValueError("spectrum must select at least one block")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("block indices must be strictly increasing")
        self.block_indices = idx
        self.blocks = [self.system.block(j) for j in idx]

    @cached_property
    def n(self) -> int:
        return sum(b.dim for b in self.blocks)

    @cached_property
    def offsets(self) -> list[int]:
        return [int(v) for v in np.cumsum([0] + [b.dim for b in self.blocks])]

    @cached_property
    def index_map(self) -> list[tuple[int, int]]:
        return [(b.index, s) for b in self.blocks for s in range(b.dim)]

    @cached_property
    def degree(self) -> int:
        """Per-coordinate trigonometric degree (tori) or harmonic degree (sphere)."""
        return max(b.max_frequency for b in self.blocks)

    def design(self, x) -> np.ndarray:
        """Matrix ``Phi`` with ``Phi[i, k] = xi_k(x_i)``; ``J alpha`` at ``x`` is ``Phi @ alpha``."""
        pts = self.system.as_points(x)
        out = np.empty((pts.shape[0], self.n))
        if self.system.is_torus:
            for b, off in zip(self.blocks, self.offsets):
                out[:, off:off + b.dim] = _torus_block_values(b, pts)
        else:
            cols = _sphere_columns([b.degree for b in self.blocks], pts)
            for b, off in zip(self.blocks, self.offsets):
                out[:, off:off + b.dim] = cols[b.degree]
        return out

    def __repr__(self):
        return f"SpectrumSelection({self.system.manifold}, d={self.system.d}, blocks={self.block_indices}, n={self.n})"


SYSTEM_NAMES = ("torus1", "torus2", "torus3", "sphere2")


@lru_cache(maxsize=None)
def make_system(name: str) -> OrthonormalSystem:
    """Shared system instance by name (``torus1``, ``torus2``, ``torus3``, ``sphere2``)."""
    if name == "sphere2":
        return OrthonormalSystem.sphere2()
    if name in ("torus1", "torus2", "torus3"):
        return OrthonormalSystem.torus(int(name[-1]))
    raise ValueError(f"unknown system {name!r}; choose from {', '.join(SYSTEM_NAMES)}")


@lru_cache(maxsize=256)
def leading_spectrum(system: OrthonormalSystem, n: int) -> SpectrumSelection:
    """Blocks ``0, 1, ...`` whose dimensions add up to exactly ``n``."""
    total, j = 0, 0
    while total < n:
        total += system.block(j).dim
        j += 1
    if total != n:
        raise ValueError(f"no leading block union of {system.manifold} has dimension {n}")
    return SpectrumSelection(system, tuple(range(j)))


def spectrum_up_to(system: OrthonormalSystem, num_blocks: int) -> SpectrumSelection:
    """The first ``num_blocks`` eigenspaces."""
    return SpectrumSelection(system, tuple(range(num_blocks)))


def kernel(spectrum: SpectrumSelection, x, y) -> np.ndarray:
    """Reproducing kernel ``K_n(x, y) = sum_k xi_k(x) xi_k(y)`` for paired points."""
    fx = spectrum.design(x)
    fy = spectrum.design(y)
    if fy.shape[0] == 1 and fx.shape[0] > 1:
        fy = np.broadcast_to(fy, fx.shape)
    return np.einsum("ik,ik->i", fx, fy)


def class_k_verify(spectrum: SpectrumSelection, points, tol: float = 1e-8) -> tuple[bool, float]:
    """Check the pointwise block identity ``sum |xi_k(x)|^2 = d_j``.

    Returns ``(ok, max deviation)``; ``ok`` also requires the sums not to exceed
    ``C * d_j`` where ``C`` is the system's class constant.
    """
    pts = spectrum.system.as_points(points)
    if pts.shape[0] == 0:
        raise ValueError("empty sample set")
    phi = spectrum.design(pts)
    worst, ok = 0.0, True
    for b, off in zip(spectrum.blocks, spectrum.offsets):
        sums = np.sum(phi[:, off:off + b.dim] ** 2, axis=1)
        dev = float(np.max(np.abs(sums - b.dim)))
        worst = max(worst, dev)
        if dev > tol or np.any(sums > spectrum.system.class_k_constant * b.dim + tol):
            ok = False
    return ok, worst


def kernel_reproducing_check(spectrum: SpectrumSelection, quad, x, y) -> float:
    """Max deviation of ``int K(x,z) K(z,y) dnu(z)`` from ``K(x,y)`` over paired points.

    ``quad`` must integrate products of the selected basis functions exactly.
    """
    if quad.exactness < 2 * spectrum.degree:
        raise ValueError(
            f"quadrature exactness {quad.exactness} < {2 * spectrum.degree} needed for kernel products"
        )
    fx, fy = spectrum.design(x), spectrum.design(y)
    fz = spectrum.design(quad.nodes)
    kxz = fx @ fz.T  # (P, Q)
    kzy = fy @ fz.T
    integral = np.sum(kxz * kzy * quad.weights, axis=1)
    direct = np.einsum("ik,ik->i", fx, fy)
    return float(np.max(np.abs(integral - direct)))
