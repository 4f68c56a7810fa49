import math

import numpy as np
import pytest
from scipy import stats

from flatpoly._rng import rng_for
from flatpoly.bodies import NormBody, diameter_of_section
from flatpoly.flatsearch import (
    proof_pipeline,
    random_search,
    ratio_minimize,
    rho_n,
    theorem3_experiment,
    witness_ratio,
)
from flatpoly.harmonics import leading_spectrum, make_system, spectrum_up_to
from flatpoly.levy import sphere_sample
from flatpoly.norms import induced_norm, kernel_column
from flatpoly.subspaces import Subspace, intersect, random_subspace

T1 = make_system("torus1")
SPEC33 = leading_spectrum(T1, 33)


# -- subspaces -----------------------------------------------------------

def test_random_subspace_orthonormal_and_full():
    L = random_subspace(12, 5, seed=0)
    assert np.abs(L.basis.T @ L.basis - np.eye(5)).max() < 1e-12
    full = random_subspace(6, 6, seed=1)
    x = np.random.default_rng(2).standard_normal(6)
    assert full.residual(x) < 1e-12
    with pytest.raises(ValueError):
        random_subspace(3, 4, seed=0)


def test_random_subspace_first_column_is_uniform():
    n = 5
    first = np.array([random_subspace(n, 2, seed=s).basis[0, 0] for s in range(3000)])
    # oracle 1: x^2 ~ Beta(1/2, (n-1)/2) for a coordinate of a uniform unit vector
    assert stats.kstest(first ** 2, stats.beta(0.5, (n - 1) / 2).cdf).pvalue > 1e-3
    # oracle 2: explicit sphere sampling
    assert stats.ks_2samp(first, sphere_sample(n, 3000, 99)[:, 0]).pvalue > 1e-3


def test_subspace_span_rejects_dependent_vectors():
    with pytest.raises(ValueError):
        Subspace.span(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(ValueError):
        Subspace(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_intersection_dimensions():
    e = np.eye(4)
    a = Subspace.span(e[:, :3])
    b = Subspace.span(e[:, 1:])
    res = intersect(a, b)
    assert res.dim == 2 and not res.degenerate
    assert Subspace.span(e[:, 1:3]).contains(res.subspace) and res.subspace.contains(Subspace.span(e[:, 1:3]))
    L1, L2 = random_subspace(10, 6, seed=3), random_subspace(10, 7, seed=4)
    generic = intersect(L1, L2)
    assert generic.dim == 3
    assert L1.contains(generic.subspace) and L2.contains(generic.subspace)
    assert intersect(Subspace.span(e[:, :1]), Subspace.span(e[:, 1:2])).subspace is None


def test_intersection_flags_nearly_parallel_complements():
    e = np.eye(3)
    a = Subspace.span(e[:, :2])
    tilt = Subspace.span(np.column_stack([e[:, 0], e[:, 1] + 1e-9 * e[:, 2]]))
    res = intersect(a, tilt)
    assert res.degenerate


# -- ratio minimization --------------------------------------------------

def test_full_space_ratio_is_one():
    res = ratio_minimize(SPEC33, Subspace.full(33), 4, 2, restarts=4, seed=0)
    assert abs(res.ratio - 1) < 1e-4


def _dirichlet_four_two_ratio(n):
    """``||D||_4 / ||D||_2`` from additive energy: ``sum_j (n - |j|)^2`` over ``|j| < n``."""
    energy = sum((n - abs(j)) ** 2 for j in range(-(n - 1), n))
    return energy ** 0.25 / math.sqrt(n)


def test_kernel_column_line_ratio():
    K = kernel_column(SPEC33)
    L = Subspace.span(K[:, None])
    res = ratio_minimize(SPEC33, L, 4, 2, restarts=2, seed=1)
    assert res.ratio == pytest.approx(_dirichlet_four_two_ratio(33), abs=1e-10)
    assert _dirichlet_four_two_ratio(33) == pytest.approx(23969 ** 0.25 / math.sqrt(33), rel=1e-15)


@pytest.mark.slow
def test_descent_beats_random_search_oracle():
    spec = leading_spectrum(T1, 65)
    L = random_subspace(65, 33, seed=5)
    res = ratio_minimize(spec, L, 4, 2, seed=5)
    oracle = random_search(spec, L, 4, 2, samples=1_000_000, seed=6)
    assert res.ratio <= oracle.ratio


@pytest.mark.parametrize("p,q", [(4, 2), (math.inf, 2), (4, 1)])
def test_witness_invariants(p, q):
    L = random_subspace(33, 17, seed=7)
    res = ratio_minimize(SPEC33, L, p, q, restarts=4, seed=7)
    assert L.residual(res.witness) < 1e-8
    assert abs(witness_ratio(SPEC33, res.witness, p, q) - res.ratio) <= 1e-8 * res.ratio
    assert res.ratio >= 1 - 1e-8
    assert res.ratio <= min(res.diagnostics["per_restart"]) * (1 + 1e-12)
    assert induced_norm(SPEC33, res.witness, q) == pytest.approx(1.0, abs=1e-10)


def test_seed_determinism():
    L = random_subspace(33, 17, seed=8)
    a = ratio_minimize(SPEC33, L, 4, 2, restarts=3, seed=8)
    b = ratio_minimize(SPEC33, L, 4, 2, restarts=3, seed=8)
    assert a.ratio == b.ratio
    np.testing.assert_array_equal(a.witness, b.witness)


def test_warm_start_never_loses_on_larger_subspace():
    rng = np.random.default_rng(9)
    big = random_subspace(33, 12, seed=9)
    small = Subspace.span(big.basis @ rng.standard_normal((12, 6)))
    r_small = ratio_minimize(SPEC33, small, 4, 2, restarts=4, seed=10)
    r_big = ratio_minimize(SPEC33, big, 4, 2, restarts=1, iters=5, seed=11, warm_start=r_small.witness)
    assert r_big.ratio <= r_small.ratio + 1e-6


def test_ratio_minimize_validates():
    L = Subspace.full(33)
    with pytest.raises(ValueError):
        ratio_minimize(SPEC33, L, 2, 4)
    with pytest.raises(ValueError):
        ratio_minimize(SPEC33, Subspace.full(9), 4, 2)


def test_random_search_witness_consistent():
    L = random_subspace(33, 5, seed=12)
    res = random_search(SPEC33, L, 4, 2, samples=5000, seed=12)
    assert abs(res.ratio - res.diagnostics["grid_ratio"]) < 1e-10 * res.ratio
    assert L.residual(res.witness) < 1e-10


# -- proof pipeline ------------------------------------------------------

def test_pipeline_full_space_reduces_to_section_diameter():
    res = proof_pipeline(SPEC33, Subspace.full(33), 4, 2, 0.5, samples=200, seed=13, restarts=8,
                         levy_samples=2000)
    m1 = res.diagnostics["m1"]
    assert m1 == 17 and res.diagnostics["m3"] == 17
    L1 = random_subspace(33, m1, rng_for(13, 0x1).integers(2**31))
    direct = diameter_of_section(NormBody.induced(SPEC33, 4), L1, restarts=8, seed=13)
    # both are local maxima of a nonconvex problem in different bases
    assert res.diagnostics["diameter"] == pytest.approx(direct.value, rel=0.02)
    assert L1.residual(res.witness) < 1e-8


def test_pipeline_cross_method_on_sphere():
    s2 = make_system("sphere2")
    spec = spectrum_up_to(s2, 8)
    assert spec.n == 64
    L2 = random_subspace(64, 48, seed=14)
    res = proof_pipeline(spec, L2, 4, 2, 0.5, samples=1000, seed=14, restarts=8, levy_samples=2000)
    d = res.diagnostics
    assert d["m3"] >= 16 and not d["degenerate"]
    L1 = random_subspace(64, 32, rng_for(14, 0x1).integers(2**31))
    L3 = intersect(L1, L2).subspace
    assert L3.dim == d["m3"]
    search = ratio_minimize(spec, L3, 4, 2, restarts=4, seed=14)
    assert 1 - 1e-8 <= res.ratio <= 10 * search.ratio
    # q = 2: the induced q-norm is Euclidean, so the comparison constant is exactly 1
    assert d["eq0_constant"] == pytest.approx(1.0, abs=1e-10)
    assert d["levy_dual_upper"] == pytest.approx(1.0, abs=1e-10)
    assert d["eq0_constant"] <= d["eq0_prediction"]


def test_pipeline_certificate_for_q_one():
    res = proof_pipeline(SPEC33, random_subspace(33, 25, seed=15), 4, 1, 0.5, samples=500, seed=15,
                         restarts=4, levy_samples=5000)
    d = res.diagnostics
    assert d["eq0_constant"] <= d["eq0_prediction"]
    assert res.ratio >= 1 - 1e-8


def test_pipeline_preconditions():
    with pytest.raises(ValueError):
        proof_pipeline(SPEC33, random_subspace(33, 10, seed=0), 4, 2, 0.5)
    with pytest.raises(ValueError):
        proof_pipeline(SPEC33, Subspace.full(33), 4, 2, 1.5)


# -- experiment table ----------------------------------------------------

def test_rho_n_cases():
    n = 100
    assert rho_n(n, 4, 2) == 1.0
    assert rho_n(n, math.inf, 2) == pytest.approx(math.sqrt(math.log(n)))
    assert rho_n(n, 4, 1) == pytest.approx(math.sqrt(math.log(n)))
    assert rho_n(n, math.inf, 1) == pytest.approx(math.log(n))
    assert rho_n(n, 2, 4) == 1.0


def test_theorem3_small_table():
    rep = theorem3_experiment("torus1", [17, 33], 0.5, 4, 2, trials=2, seed=16, restarts=4, iters=200)
    assert [r.n for r in rep.rows] == [17, 17, 33, 33]
    assert all(r.ratio >= 1 - 1e-8 for r in rep.rows)
    for s in rep.summary:
        ratios = [r.ratio for r in rep.rows if r.n == s.n]
        assert s.worst_ratio == max(ratios) and s.best_ratio == min(ratios)
        assert s.normalized == s.worst_ratio / s.rho
    again = theorem3_experiment("torus1", [17, 33], 0.5, 4, 2, trials=2, seed=16, restarts=4, iters=200)
    assert [r.ratio for r in again.rows] == [r.ratio for r in rep.rows]


def test_theorem3_validates():
    with pytest.raises(ValueError):
        theorem3_experiment("torus1", [3], 0.5, 4, 2, trials=1, seed=0)
    with pytest.raises(ValueError):
        theorem3_experiment("torus1", [33], 1.0, 4, 2, trials=1, seed=0)
