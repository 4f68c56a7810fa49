"""Numerical screens for the volume / diameter inequalities behind the
random-subspace argument.

Every check returns an :class:`InequalityReport`.  A check passes when the
inequality holds within three combined standard errors of the Monte Carlo
quantities involved; when a volume estimate is too noisy
(``stderr / value > INCONCLUSIVE_REL``) the status is ``"inconclusive"``
rather than ``"fail"``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln

from flatpoly._rng import digest
from flatpoly.bodies import (
    NormBody,
    VolumeEstimate,
    ball_volume,
    diameter_of_section,
    dual_body,
    mc_volume,
    norm,
)
from flatpoly.levy import levy_mean, sphere_sample
from flatpoly.subspaces import Subspace

SIGMAS = 3.0
INCONCLUSIVE_REL = 0.05
DEFAULT_C2 = 0.5
# rounding slack so exact equalities (zero Monte Carlo error) still pass
FLOAT_RTOL = 1e-12


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    status: str
    stderr_budget: float
    inputs_digest: str
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _digest(body: NormBody, *extra) -> str:
    parts = [body.kind, body.dim, body.p, body.scale]
    for arr in (body.shape, body.frame, body.basis):
        if arr is not None:
            parts.append(arr)
    return digest(*parts, *extra)


def _rel(v: VolumeEstimate) -> float:
    if v.value == 0:
        return math.inf
    return v.stderr / v.value


def _report(name, lhs, rhs, budget, body, extra, noisy, **details) -> InequalityReport:
    """``lhs <= rhs`` up to ``SIGMAS * budget``."""
    holds = lhs <= rhs + SIGMAS * budget + FLOAT_RTOL * max(1.0, abs(lhs), abs(rhs))
    status = "inconclusive" if noisy else ("pass" if holds else "fail")
    return InequalityReport(name, float(lhs), float(rhs), float(rhs - lhs), status == "pass", status, float(budget), _digest(body, name, *extra), details)


def check_urysohn(body: NormBody, vol_samples: int = 100_000, levy_samples: int = 20_000, seed: int = 0) -> InequalityReport:
    """``(Vol V / Vol B)^(1/n) <= M_{V°}`` (mean half-width of ``V``)."""
    n = body.dim
    if n > 10:
        raise ValueError("volume checks are limited to n <= 10")
    vol = mc_volume(body, samples=vol_samples, seed=seed)
    lev = levy_mean(body, levy_samples, seed + 1, dual=True)
    ratio = vol.value / ball_volume(n)
    lhs = ratio ** (1.0 / n)
    lhs_se = lhs * _rel(vol) / n if vol.value > 0 else math.inf
    budget = math.hypot(lhs_se, lev.stderr)
    return _report("urysohn", lhs, lev.value, budget, body, [vol_samples, levy_samples, seed],
                   _rel(vol) > INCONCLUSIVE_REL, volume=vol.value, volume_stderr=vol.stderr,
                   levy_dual=lev.value, levy_dual_stderr=lev.stderr)


def _section_volumes(body: NormBody, L: Subspace | None, samples: int, seed: int):
    """Volumes of ``K = body & L`` and of its polar inside ``L``."""
    K = body if L is None else body.section(L)
    vol = mc_volume(K, samples=samples, seed=seed)
    pol = mc_volume(dual_body(K), samples=samples, seed=seed + 1)
    return K, vol, pol


def check_santalo(body: NormBody, L: Subspace | None = None, samples: int = 100_000, seed: int = 0) -> InequalityReport:
    """``Vol(K) Vol(K°) <= Vol(B)^2`` for ``K`` the body or its section by ``L``.

    ``lhs`` is the normalized product ``Vol(K) Vol(K°) / Vol(B)^2``; ``rhs`` is 1.
    """
    K, vol, pol = _section_volumes(body, L, samples, seed)
    m = K.dim
    if m > 8:
        raise ValueError("santalo check is limited to dimension <= 8")
    ratio = vol.value * pol.value / ball_volume(m) ** 2
    budget = ratio * math.hypot(_rel(vol), _rel(pol)) if ratio > 0 else math.inf
    noisy = max(_rel(vol), _rel(pol)) > INCONCLUSIVE_REL
    return _report("santalo", ratio, 1.0, budget, body, [m, samples, seed], noisy,
                   volume=vol.value, volume_stderr=vol.stderr, polar_volume=pol.value, polar_stderr=pol.stderr)


def check_polar_containment(body: NormBody, L: Subspace, samples: int = 100_000, seed: int = 0,
                            restarts: int = 32) -> InequalityReport:
    """``2^m Vol(B^m) diam(K)^(-m) <= Vol(K°)`` for ``K = body & L``."""
    m = L.dim
    if m > 8:
        raise ValueError("section dimension must be <= 8")
    diam = diameter_of_section(body, L, restarts=restarts, seed=seed)
    K = body.section(L)
    pol = mc_volume(dual_body(K), samples=samples, seed=seed + 1)
    lhs = 2.0 ** m * ball_volume(m) * diam.value ** (-m)
    return _report("polar_containment", lhs, pol.value, pol.stderr, body, [m, samples, seed],
                   _rel(pol) > INCONCLUSIVE_REL, diameter=diam.value, diameter_converged=diam.converged,
                   polar_volume=pol.value, polar_stderr=pol.stderr)


def check_central_section_max(body: NormBody, L: Subspace, offsets, samples: int = 100_000, seed: int = 0) -> InequalityReport:
    """``Vol_m(V & (y + L)) <= Vol_m(V & L)`` for each offset ``y`` orthogonal to ``L``.

    Reports the largest ratio of off-centre to central volume as ``lhs``
    (``rhs`` is 1).
    """
    central = mc_volume(body, L, samples, seed)
    worst_ratio, worst_budget, worst = -math.inf, 0.0, None
    noisy = _rel(central) > INCONCLUSIVE_REL
    for i, y in enumerate(np.atleast_2d(np.asarray(offsets, dtype=float))):
        if np.linalg.norm(L.basis.T @ y) > 1e-10 * max(1.0, np.linalg.norm(y)):
            raise ValueError("offsets must be orthogonal to L")
        v = mc_volume(body, L, samples, seed + 1 + i, offset=y)
        ratio = v.value / central.value
        budget = math.hypot(v.stderr, ratio * central.stderr) / central.value
        # margin test per offset; keep the least favourable one
        if ratio - SIGMAS * budget > worst_ratio - SIGMAS * worst_budget:
            worst_ratio, worst_budget, worst = ratio, budget, v
    return _report("central_section", worst_ratio, 1.0, worst_budget, body, [L.basis, samples, seed], noisy,
                   central_volume=central.value, central_stderr=central.stderr,
                   offset_volume=worst.value, offset_stderr=worst.stderr)


def mahler_ratio(body: NormBody, samples: int = 100_000, seed: int = 0):
    """``(Vol V Vol V°)^(1/n) / Vol(B)^(2/n)`` with its standard error and the raw volumes."""
    n = body.dim
    vol = mc_volume(body, samples=samples, seed=seed)
    pol = mc_volume(dual_body(body), samples=samples, seed=seed + 1)
    prod = vol.value * pol.value / ball_volume(n) ** 2
    r = prod ** (1.0 / n)
    se = r * math.hypot(_rel(vol), _rel(pol)) / n
    return r, se, vol, pol


def check_bourgain_milman(body: NormBody, samples: int = 100_000, seed: int = 0, c2: float = DEFAULT_C2) -> InequalityReport:
    """Screen ``r(V) >= c2`` for the normalized volume product ``r``.

    Here ``lhs = c2`` and ``rhs = r(V)`` so that ``lhs <= rhs`` is the inequality.
    """
    if body.dim > 8:
        raise ValueError("bourgain-milman check is limited to dimension <= 8")
    r, se, vol, pol = mahler_ratio(body, samples, seed)
    noisy = max(_rel(vol), _rel(pol)) > INCONCLUSIVE_REL
    return _report("bourgain_milman", c2, r, se, body, [samples, seed, c2], noisy,
                   ratio=r, ratio_stderr=se, volume=vol.value, polar_volume=pol.value)


def check_volume_lower_bound(body: NormBody, samples: int = 100_000, seed: int = 0, c1: float = 1.0,
                             c2: float = DEFAULT_C2, levy_samples: int = 20_000) -> InequalityReport:
    """``Vol(V) >= (c2 / (c1 M_V))^n Vol(B)`` for ``V`` inside the unit ball.

    Compared on the n-th-root scale: ``lhs = c2 / c1`` and ``rhs`` is the
    implied constant ``M_V (Vol V / Vol B)^(1/n)``.
    """
    n = body.dim
    if n > 8:
        raise ValueError("volume lower bound check is limited to dimension <= 8")
    pts = sphere_sample(n, 2000, seed + 7)
    if np.any(norm(body, pts) < 1.0 - 1e-12):
        raise ValueError("body is not contained in the Euclidean unit ball")
    vol = mc_volume(body, samples=samples, seed=seed)
    lev = levy_mean(body, levy_samples, seed + 1)
    root = (vol.value / ball_volume(n)) ** (1.0 / n)
    implied = lev.value * root
    se = implied * math.hypot(_rel(vol) / n, lev.stderr / lev.value) if vol.value > 0 else math.inf
    return _report("volume_lower_bound", c2 / c1, implied, se, body, [samples, seed, c1, c2],
                   _rel(vol) > INCONCLUSIVE_REL, implied_constant=implied, volume=vol.value,
                   levy_mean=lev.value, levy_stderr=lev.stderr)


def check_diameter_bound(body: NormBody, L: Subspace, samples: int = 100_000, seed: int = 0,
                         restarts: int = 32) -> InequalityReport:
    """``diam(V & L) >= 2 (Vol_m(V & L) / Vol_m(B^m))^(1/m)``.

    ``lhs`` is the volume side, ``rhs`` the diameter.
    """
    m = L.dim
    if m > 8:
        raise ValueError("section dimension must be <= 8")
    diam = diameter_of_section(body, L, restarts=restarts, seed=seed)
    vol = mc_volume(body, L, samples, seed + 1)
    lhs = 2.0 * (vol.value / ball_volume(m)) ** (1.0 / m)
    se = lhs * _rel(vol) / m if vol.value > 0 else 0.0
    return _report("diameter_bound", lhs, diam.value, se, body, [m, samples, seed],
                   _rel(vol) > INCONCLUSIVE_REL, diameter=diam.value, section_volume=vol.value,
                   section_stderr=vol.stderr)


def omega(n: int, m: int) -> tuple[float, float]:
    """Gamma-ratio factor of the section-diameter bound.

    ``paper_value = (Gamma(n/2+1) / (Gamma((n-m)/2+1) Gamma(m/2+1)))^(1/m)``;
    ``corrected_value`` is its reciprocal, which is what the volume ratio
    ``Vol_n(B^n) / (Vol_{n-m}(B^{n-m}) Vol_m(B^m))`` evaluates to with the
    standard ball volume.
    """
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    log_val = (gammaln(n / 2 + 1) - gammaln((n - m) / 2 + 1) - gammaln(m / 2 + 1)) / m
    return math.exp(log_val), math.exp(-log_val)
