"""Search for polynomials with small ``||t||_p / ||t||_q`` inside a given
coefficient subspace.

Three routes are provided:

* :func:`ratio_minimize` - multi-start projected (sub)gradient descent on the
  q-norm sphere of the subspace;
* :func:`proof_pipeline` - the constructive trace of the random-subspace
  argument: a Haar subspace ``L1``, its intersection with the target subspace,
  and the diameter witness of the induced p-ball section there;
* :func:`random_search` - pure sampling, used as a brute-force oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from flatpoly._rng import chunk_sizes, rng_for
from flatpoly.bodies import NormBody, conjugate, diameter_of_section
from flatpoly.harmonics import SpectrumSelection, leading_spectrum, make_system
from flatpoly.inequalities import omega
from flatpoly.levy import levy_mean, sphere_sample
from flatpoly.norms import (
    _cached_rule,
    _lp_from_values,
    LINF_DENSITY,
    default_rule,
    design_at,
    induced_norm,
)
from flatpoly.subspaces import Subspace, intersect, random_subspace

DEFAULT_RESTARTS = 16
DEFAULT_ITERS = 500
# subgradient steps converge more slowly than the smooth line search
NONSMOOTH_ITERS = 2000

__all__ = [
    "FlatSearchResult",
    "Subspace",
    "random_subspace",
    "ratio_minimize",
    "random_search",
    "proof_pipeline",
    "theorem3_experiment",
    "rho_n",
    "witness_ratio",
]


@dataclass
class FlatSearchResult:
    witness: np.ndarray
    ratio: float
    method: str
    iterations: int
    restarts: int
    seed: int
    p: float
    q: float
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)


def witness_ratio(spectrum: SpectrumSelection, alpha, p: float, q: float) -> float:
    """``||J alpha||_p / ||J alpha||_q`` with the library's default norm evaluation."""
    return float(induced_norm(spectrum, alpha, p) / induced_norm(spectrum, alpha, q))


class _RatioObjective:
    """Batched ``N_p / N_q`` and its gradient in subspace coordinates."""

    def __init__(self, spectrum: SpectrumSelection, B: np.ndarray, p: float, q: float):
        self.p, self.q = p, q
        self.Ap, self.wp = self._operator(spectrum, B, p)
        self.Aq, self.wq = self._operator(spectrum, B, q)

    @staticmethod
    def _operator(spectrum, B, r):
        if math.isinf(r):
            quad = _cached_rule(spectrum.system, "grid", spectrum.degree, LINF_DENSITY)
        else:
            quad = default_rule(spectrum, r)
        return design_at(spectrum, quad) @ B, quad.weights

    @staticmethod
    def _norm_and_grad(C, A, w, r):
        v = C @ A.T
        if math.isinf(r):
            a = np.abs(v)
            i = a.argmax(axis=1)
            val = a[np.arange(len(C)), i]
            g = np.sign(v[np.arange(len(C)), i])[:, None] * A[i]
            return val, g
        val = _lp_from_values(v, r, w)
        safe = np.where(val > 0, val, 1.0)[:, None]
        coef = w * np.sign(v) * (np.abs(v) / safe) ** (r - 1)
        return val, coef @ A

    def norms(self, C):
        vp = self._norm_and_grad(C, self.Ap, self.wp, self.p)[0]
        vq = self._norm_and_grad(C, self.Aq, self.wq, self.q)[0]
        return vp, vq

    def ratio(self, C):
        vp, vq = self.norms(C)
        return vp / vq

    def ratio_and_grad(self, C):
        vp, gp = self._norm_and_grad(C, self.Ap, self.wp, self.p)
        vq, gq = self._norm_and_grad(C, self.Aq, self.wq, self.q)
        R = vp / vq
        G = gp / vq[:, None] - (vp / vq ** 2)[:, None] * gq
        return R, G, vq


def _descend(obj: _RatioObjective, C: np.ndarray, iters: int, nonsmooth: bool):
    """Run the batched descent; returns best coordinates, best ratios, history of best."""
    R, G, vq = obj.ratio_and_grad(C)
    C = C / vq[:, None]
    R, G, _ = obj.ratio_and_grad(C)
    best_C, best_R = C.copy(), R.copy()
    history = [best_R.copy()]
    step = np.full(len(C), 0.1)
    # Polyak target gap for the nonsmooth case
    delta = 0.05 * best_R
    stall = np.zeros(len(C), dtype=int)
    for _ in range(iters):
        gnorm = np.linalg.norm(G, axis=1)
        gnorm[gnorm == 0] = 1.0
        if nonsmooth:
            target = best_R - delta
            eta = (R - target) / gnorm ** 2
            C_new = C - eta[:, None] * G
            _, vq_new = obj.norms(C_new)
            C = C_new / vq_new[:, None]
            R, G, _ = obj.ratio_and_grad(C)
            improved = R < best_R - 1e-15
            best_C[improved] = C[improved]
            best_R[improved] = R[improved]
            stall = np.where(improved, 0, stall + 1)
            shrink = stall >= 10
            delta = np.where(shrink, delta / 2, delta)
            stall[shrink] = 0
        else:
            eta = step.copy()
            accepted = np.zeros(len(C), dtype=bool)
            C_next = C.copy()
            R_next = R.copy()
            for _ in range(40):
                todo = ~accepted
                if not todo.any():
                    break
                trial = C[todo] - (eta[todo] / gnorm[todo])[:, None] * G[todo]
                Rt = obj.ratio(trial)
                ok = Rt < R[todo]
                idx = np.flatnonzero(todo)
                C_next[idx[ok]] = trial[ok]
                R_next[idx[ok]] = Rt[ok]
                accepted[idx[ok]] = True
                eta[idx[~ok]] *= 0.5
            step = np.where(accepted, eta * 1.5, eta)
            step = np.maximum(step, 1e-14)
            _, vq_new = obj.norms(C_next)
            C = C_next / vq_new[:, None]
            R, G, _ = obj.ratio_and_grad(C)
            better = R < best_R
            best_C[better] = C[better]
            best_R[better] = R[better]
        history.append(best_R.copy())
    return best_C, best_R, np.array(history)


def ratio_minimize(
    spectrum: SpectrumSelection,
    L: Subspace,
    p: float,
    q: float,
    restarts: int = DEFAULT_RESTARTS,
    iters: int | None = None,
    seed: int = 0,
    warm_start=None,
    tol: float = 1e-7,
) -> FlatSearchResult:
    """Minimize ``||J a||_p / ||J a||_q`` over ``a`` in ``L``.

    Descent runs in the subspace coordinates, renormalizing to unit q-norm
    after every step.  Smooth exponents use Armijo backtracking; ``p = inf``
    uses Polyak steps at the maximizing grid node.  ``warm_start`` (a vector in
    R^n) is projected onto ``L`` and used as an extra start, as is the
    projection of the constant function when the spectrum contains it.  The
    result is flagged non-converged when the best ratio still moved by more
    than ``tol`` (relative) over the final tenth of the iterations.  ``iters`` defaults to
    ``DEFAULT_ITERS`` for smooth objectives and ``NONSMOOTH_ITERS`` otherwise.
    """
    if not 1 <= q < p:
        raise ValueError("need 1 <= q < p <= inf")
    if L.ambient_dim != spectrum.n:
        raise ValueError("subspace does not live in the spectrum's coefficient space")
    nonsmooth = math.isinf(p) or q == 1
    if iters is None:
        iters = NONSMOOTH_ITERS if nonsmooth else DEFAULT_ITERS
    B = L.basis
    obj = _RatioObjective(spectrum, B, p, q)
    starts = [rng_for(seed, 0xF1A7, r).standard_normal(L.dim) for r in range(restarts)]
    # the constant function is perfectly flat; random starts rarely reach its small basin
    if spectrum.block_indices[0] == 0:
        const = B[0]
        if np.linalg.norm(const) > 1e-8:
            starts.append(const.copy())
    warm = None
    if warm_start is not None:
        warm = L.coords(np.asarray(warm_start, dtype=float))
        starts.insert(0, warm)
    C0 = np.array(starts)
    best_C, _, hist = _descend(obj, C0, iters, nonsmooth)

    candidates = [B @ c for c in best_C]
    if warm is not None:
        candidates.append(B @ warm)
    finals = np.array([witness_ratio(spectrum, a, p, q) for a in candidates])
    i = int(np.argmin(finals))
    alpha = candidates[i]
    alpha = alpha / float(induced_norm(spectrum, alpha, q))
    ratio = witness_ratio(spectrum, alpha, p, q)
    tail = max(1, iters // 10)
    best_track = hist.min(axis=1)
    moved = (best_track[-tail - 1] - best_track[-1]) / best_track[-1] if len(best_track) > tail else 0.0
    return FlatSearchResult(
        witness=alpha, ratio=ratio, method="ratio-descent", iterations=iters, restarts=len(starts),
        seed=seed, p=p, q=q, converged=bool(moved <= tol),
        diagnostics={"per_restart": finals[: len(best_C)].tolist(), "tail_relative_change": float(moved)},
    )


def random_search(spectrum: SpectrumSelection, L: Subspace, p: float, q: float, samples: int = 100_000,
                  seed: int = 0) -> FlatSearchResult:
    """Best ratio among uniformly random directions in ``L`` (brute-force oracle)."""
    obj = _RatioObjective(spectrum, L.basis, p, q)
    best_r, best_c = math.inf, None
    for i, size in chunk_sizes(samples):
        C = rng_for(seed, 0x5EA, i).standard_normal((size, L.dim))
        R = obj.ratio(C)
        j = int(np.argmin(R))
        if R[j] < best_r:
            best_r, best_c = float(R[j]), C[j]
    alpha = L.basis @ best_c
    alpha = alpha / float(induced_norm(spectrum, alpha, q))
    return FlatSearchResult(alpha, witness_ratio(spectrum, alpha, p, q), "random-sampling", samples, 1, seed, p, q,
                            diagnostics={"grid_ratio": best_r})


def proof_pipeline(
    spectrum: SpectrumSelection,
    L_m2: Subspace,
    p: float,
    q: float,
    lam: float,
    samples: int = 1000,
    seed: int = 0,
    restarts: int = 32,
    levy_samples: int = 20_000,
) -> FlatSearchResult:
    """Constructive trace of the random-subspace argument.

    1. Draw a Haar subspace ``L1`` of dimension ``ceil(lam * n)``.
    2. Certify empirically the Euclidean/W-norm comparison on ``L1``: the
       largest ``||a||_2 / ||J a||_q`` over ``samples`` random directions, next
       to the prediction ``M_{W°} / (1 - lam)`` where ``M_{W°}`` is bounded by
       the Levy mean of the induced ``q'`` norm.
    3. Intersect ``L1`` with ``L_m2``.
    4. Return the diameter witness of the induced p-ball section of the
       intersection, rescaled to unit q-norm.
    """
    n = spectrum.n
    if L_m2.ambient_dim != n:
        raise ValueError("subspace does not live in the spectrum's coefficient space")
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0, 1)")
    if L_m2.dim / n + lam <= 1:
        raise ValueError("dim(L_m2)/n + lam must exceed 1 for a nontrivial intersection")
    m1 = math.ceil(lam * n)
    L1 = random_subspace(n, m1, rng_for(seed, 0x1).integers(2**31))

    # norm comparison on L1
    U = sphere_sample(m1, samples, seed)
    qnorms = induced_norm(spectrum, U @ L1.basis.T, q)
    eq0_constant = float(np.max(1.0 / qnorms))
    dual_levy = levy_mean(NormBody.induced(spectrum, conjugate(q)), levy_samples, seed + 3)
    prediction = dual_levy.value / (1.0 - lam)

    inter = intersect(L1, L_m2)
    if inter.subspace is None:
        raise ValueError("intersection of L1 and L_m2 is trivial")
    L3 = inter.subspace
    m3 = L3.dim
    diam = diameter_of_section(NormBody.induced(spectrum, p), L3, restarts=restarts, seed=seed)
    alpha = diam.witness / float(induced_norm(spectrum, diam.witness, q))
    ratio = witness_ratio(spectrum, alpha, p, q)
    return FlatSearchResult(
        witness=alpha, ratio=ratio, method="proof-pipeline", iterations=0, restarts=restarts, seed=seed,
        p=p, q=q, converged=diam.converged and not inter.degenerate,
        diagnostics={
            "m1": m1, "m2": L_m2.dim, "m3": m3, "lam": lam,
            "eq0_constant": eq0_constant, "eq0_prediction": prediction,
            "levy_dual_upper": dual_levy.value, "levy_dual_stderr": dual_levy.stderr,
            "diameter": diam.value, "degenerate": inter.degenerate,
            "omega": omega(n, m3)[0],
        },
    )


def rho_n(n: int, p: float, q: float) -> float:
    """Endpoint-loss normalizer for the ``L_p / L_q`` ratio.

    1 when both exponents are interior, ``sqrt(log n)`` when exactly one
    endpoint (``q = 1`` or ``p = inf``) is involved, ``log n`` for
    ``q = 1, p = inf``.  For ``p <= q`` the ratio is at most 1, so 1.
    """
    if p <= q:
        return 1.0
    ends = (q == 1) + math.isinf(p)
    return math.log(n) ** (ends / 2.0)


@dataclass
class Theorem3Row:
    n: int
    trial: int
    s: int
    ratio: float
    converged: bool


@dataclass
class Theorem3Summary:
    n: int
    worst_ratio: float
    best_ratio: float
    rho: float
    normalized: float


@dataclass
class Theorem3Report:
    rows: list[Theorem3Row]
    summary: list[Theorem3Summary]
    config: dict


def theorem3_experiment(
    manifold: str,
    n_list,
    eps: float,
    p: float,
    q: float,
    trials: int,
    seed: int,
    restarts: int = DEFAULT_RESTARTS,
    iters: int | None = None,
) -> Theorem3Report:
    """Minimized ratios in ``trials`` Haar subspaces of dimension ``ceil(eps n)`` per ``n``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if eps * min(n_list) < 2:
        raise ValueError("eps * min(n) must be at least 2")
    system = make_system(manifold)
    rows, summary = [], []
    for n in n_list:
        spec = leading_spectrum(system, n)
        s = math.ceil(eps * n)
        ratios = []
        for t in range(trials):
            L = random_subspace(n, s, rng_for(seed, n, t).integers(2**31))
            res = ratio_minimize(spec, L, p, q, restarts, iters, seed=seed + t)
            rows.append(Theorem3Row(n, t, s, res.ratio, res.converged))
            ratios.append(res.ratio)
        rho = rho_n(n, p, q)
        summary.append(Theorem3Summary(n, max(ratios), min(ratios), rho, max(ratios) / rho))
    config = dict(manifold=manifold, n_list=list(n_list), eps=eps, p=p, q=q, trials=trials, seed=seed,
                  restarts=restarts, iters=iters)
    return Theorem3Report(rows, summary, config)
