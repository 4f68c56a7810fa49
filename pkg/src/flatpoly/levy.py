"""Levy means ``M = int_{S^{n-1}} ||a|| dmu(a)`` by Monte Carlo."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from flatpoly._rng import chunk_sizes, digest, rng_for
from flatpoly.bodies import NormBody, dual_norm, norm
from flatpoly.harmonics import OrthonormalSystem, SpectrumSelection
from flatpoly.norms import induced_norm

DEFAULT_SAMPLES = 20_000


class LevyMeanEstimate(NamedTuple):
    value: float
    stderr: float
    samples: int
    body_digest: str
    seed: int


def sphere_sample(n: int, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. uniform points on ``S^{n-1}`` (normalized Gaussians), one per row."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = np.empty((count, n))
    start = 0
    for i, size in chunk_sizes(count):
        g = rng_for(seed, 0x5E7E, n, i).standard_normal((size, n))
        out[start:start + size] = g / np.linalg.norm(g, axis=1, keepdims=True)
        start += size
    return out


def _body_digest(body: NormBody) -> str:
    parts = [body.kind, body.dim, body.p, body.scale]
    if body.shape is not None:
        parts.append(body.shape)
    if body.frame is not None:
        parts.append(body.frame)
    if body.spectrum is not None:
        parts.append([body.spectrum.system.manifold, body.spectrum.system.d, list(body.spectrum.block_indices)])
    return digest(*parts)


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def levy_mean(body: NormBody, samples: int = DEFAULT_SAMPLES, seed: int = 0, dual: bool = False) -> LevyMeanEstimate:
    """Sample mean of the body's norm (or its dual norm) over uniform sphere points."""
    pts = sphere_sample(body.dim, samples, seed)
    vals = dual_norm(body, pts) if dual else norm(body, pts)
    m, se = mean_and_stderr(vals)
    tag = _body_digest(body) + ("-dual" if dual else "")
    return LevyMeanEstimate(m, se, samples, tag, seed)


@dataclass
class SweepRow:
    n: int
    p: float
    mean: float
    stderr: float
    normalized: float
    normalizer: str


def theorem2_sweep(system: OrthonormalSystem, spectra: list[SpectrumSelection], p_list, samples: int = DEFAULT_SAMPLES,
                   seed: int = 0) -> list[SweepRow]:
    """Levy means of the induced L_p norms for each spectrum and exponent.

    The same sphere points are reused for every ``p`` at a given ``n``.
    Finite ``p`` rows carry ``M / sqrt(p)``; ``p = inf`` rows ``M / sqrt(ln n)``.
    """
    rows = []
    for spec in spectra:
        if spec.system is not system:
            raise ValueError("spectrum belongs to a different system")
        pts = sphere_sample(spec.n, samples, seed)
        for p in p_list:
            vals = induced_norm(spec, pts, p)
            m, se = mean_and_stderr(vals)
            if math.isinf(p):
                rows.append(SweepRow(spec.n, p, m, se, m / math.sqrt(math.log(spec.n)), "sqrt(ln n)"))
            else:
                rows.append(SweepRow(spec.n, p, m, se, m / math.sqrt(p), "sqrt(p)"))
    return rows
