"""Classical flat trigonometric polynomials with +-1 or random coefficients.

Polynomials here are ``sum_{m=0}^{N-1} c_m e^{i m theta}`` on the circle with
the unnormalized coefficient convention, so a sign sequence of length ``N``
has ``||.||_2 = sqrt(N)`` under the normalized measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gamma

from flatpoly._rng import chunk_sizes, rng_for

GRID_FACTOR = 64
MAX_RUDIN_SHAPIRO_K = 20
RUDIN_CONSTANT = 5.0


@dataclass(frozen=True)
class SignSequence:
    signs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signs, dtype=np.int8)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("sign sequence must be a non-empty vector")
        if not np.all(np.abs(s) == 1):
            raise ValueError("entries must be +1 or -1")
        s.setflags(write=False)
        object.__setattr__(self, "signs", s)

    @property
    def length(self) -> int:
        return self.signs.size

    def __len__(self) -> int:
        return self.signs.size


def random_sign_poly(N: int, seed: int) -> SignSequence:
    """I.i.d. uniform signs."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return SignSequence(rng_for(seed, 0xB17, N).choice(np.array([-1, 1], dtype=np.int8), size=N))


def rudin_shapiro(k: int) -> SignSequence:
    """P-coefficients of the Rudin-Shapiro pair: ``P' = P + z^N Q``, ``Q' = P - z^N Q``."""
    if not 0 <= k <= MAX_RUDIN_SHAPIRO_K:
        raise ValueError(f"k must lie in [0, {MAX_RUDIN_SHAPIRO_K}]")
    P = np.array([1], dtype=np.int8)
    Q = np.array([1], dtype=np.int8)
    for _ in range(k):
        P, Q = np.concatenate([P, Q]), np.concatenate([P, -Q])
    return SignSequence(P)


def _values_on_grid(coeffs: np.ndarray, M: int) -> np.ndarray:
    """``sum c_m e^{i m theta_j}`` at ``theta_j = 2 pi j / M`` (``M >= len(coeffs)``)."""
    return np.fft.ifft(coeffs, n=M) * M


def sup_norm(coeffs, grid_factor: int = GRID_FACTOR, refine: int = 3) -> float:
    """``max |sum c_m e^{i m theta}|`` from a ``grid_factor * N`` point FFT grid,
    polished by bounded 1-D maximization around the best ``refine`` nodes."""
    c = np.asarray(getattr(coeffs, "signs", coeffs)).astype(complex)
    N = c.size
    M = grid_factor * max(N, 1)
    vals = np.abs(_values_on_grid(c, M))
    best = float(vals.max())
    if refine <= 0:
        return best
    m = np.arange(N)
    h = 2 * np.pi / M

    def neg_abs(theta):
        return -abs(np.dot(c, np.exp(1j * m * theta)))

    for j in np.argsort(vals)[-refine:]:
        t0 = 2 * np.pi * j / M
        res = minimize_scalar(neg_abs, bounds=(t0 - h, t0 + h), method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


class RudinResult(NamedTuple):
    best_sup: float
    passed: bool
    bound: float
    best_signs: SignSequence


def rudin_check(N: int, attempts: int, seed: int, candidates=None) -> RudinResult:
    """Smallest sup-norm among ``attempts`` random sign sequences (plus any
    injected ``candidates``); passes when below ``5 sqrt(N)``."""
    if N < 4:
        raise ValueError("N must be >= 4")
    seqs = [random_sign_poly(N, rng_for(seed, a).integers(2**31)) for a in range(attempts)]
    for cand in candidates or []:
        if len(cand) != N:
            raise ValueError("candidate length differs from N")
        seqs.append(cand)
    sups = [sup_norm(s) for s in seqs]
    i = int(np.argmin(sups))
    bound = RUDIN_CONSTANT * math.sqrt(N)
    return RudinResult(sups[i], bool(sups[i] < bound), bound, seqs[i])


class MomentResult(NamedTuple):
    ratio: float
    target: float
    passed: bool
    stderr: float


def moment_target(p: int) -> float:
    return float(gamma(1 + p / 2))


def moment_check(N: int, p: int, trials: int, seed: int, rademacher: bool = False,
                 rtol: float = 0.10) -> MomentResult:
    """Monte Carlo ``E ||q_N||_p^p / N^{p/2}`` for ``q_N = sum_{k=0}^N X_k e^{ik theta}``.

    ``|q_N|^p = (q_N conj(q_N))^{p/2}`` is a trigonometric polynomial of degree
    ``p N / 2``, so its mean is exact on more than ``p N / 2`` equispaced
    nodes.  For ``p = 2`` the expectation ``N + 1`` is returned directly.
    """
    if p not in (2, 4, 6, 8):
        raise ValueError("p must be one of 2, 4, 6, 8")
    if N < 1 or trials < 1:
        raise ValueError("N and trials must be positive")
    target = moment_target(p)
    if p == 2:
        ratio = (N + 1) / N
        return MomentResult(ratio, target, bool(abs(ratio - target) <= rtol * target), 0.0)
    M = p * N // 2 + 1
    vals = []
    for i, size in chunk_sizes(trials, 256):
        rng = rng_for(seed, 0x30, i)
        if rademacher:
            X = rng.choice(np.array([-1.0, 1.0]), size=(size, N + 1))
        else:
            X = rng.standard_normal((size, N + 1))
        q = np.fft.ifft(X, n=M, axis=1) * M
        vals.append(np.mean(np.abs(q) ** p, axis=1))
    vals = np.concatenate(vals) / N ** (p / 2)
    ratio = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return MomentResult(ratio, target, bool(abs(ratio - target) <= rtol * target), se)
