import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammaln

from flatpoly.bodies import (
    NonConvergenceWarning,
    NormBody,
    ball_volume,
    conjugate,
    diameter_of_section,
    dual_body,
    dual_norm,
    induced_dual_norm,
    mc_volume,
    norm,
    norm_grad,
)
from flatpoly.harmonics import leading_spectrum, make_system
from flatpoly.levy import sphere_sample
from flatpoly.norms import induced_norm
from flatpoly.subspaces import Subspace, random_subspace


def lp_ball_volume(n, p):
    """``(2 Gamma(1 + 1/p))^n / Gamma(1 + n/p)``."""
    return math.exp(n * (math.log(2) + gammaln(1 + 1 / p)) - gammaln(1 + n / p))


def within(est, truth, k=3.0):
    return abs(est.value - truth) <= k * est.stderr


def test_norm_examples():
    assert norm(NormBody.euclidean(2), [3, 4]) == pytest.approx(5.0)
    assert norm(NormBody.lp(3, 1), [1, -2, 3]) == pytest.approx(6.0)
    assert norm(NormBody.lp(3, math.inf), [1, -2, 3]) == pytest.approx(3.0)


def test_dual_examples():
    assert dual_norm(NormBody.lp(3, 1), [1, -2, 3]) == pytest.approx(3.0)
    assert dual_norm(NormBody.euclidean(2), [3, 4]) == pytest.approx(5.0)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        norm(NormBody.lp(3, 1), [1.0, 2.0])


def test_dual_of_dual_is_norm():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 5))
    for body in (NormBody.lp(5, 1.5), NormBody.lp(5, 3, scale=2.0), NormBody.lp(5, math.inf),
                 NormBody.from_semi_axes([1, 2, 3, 0.5, 0.7])):
        np.testing.assert_allclose(norm(dual_body(dual_body(body)), x), norm(body, x), rtol=1e-10)


def test_ellipsoid_dual_matches_support_function():
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    body = NormBody.from_semi_axes([2.0, 1.0, 0.25], q)
    u = rng.standard_normal(3)
    # h(u) = sqrt(u^T A^{-1} u) for {x : x^T A x <= 1}
    assert dual_norm(body, u) == pytest.approx(math.sqrt(u @ np.linalg.solve(body.shape, u)), rel=1e-12)


def test_polyhedral_section_dual_matches_brute_force():
    L = random_subspace(4, 2, seed=3)
    sec = NormBody.lp(4, math.inf).section(L)
    u = np.array([0.3, -1.1])
    # oracle: enumerate polygon vertices {|B c|_i = 1 active on two rows}
    B = L.basis
    best = -math.inf
    for i in range(4):
        for j in range(i + 1, 4):
            for si in (-1, 1):
                for sj in (-1, 1):
                    A = B[[i, j]]
                    if abs(np.linalg.det(A)) < 1e-12:
                        continue
                    c = np.linalg.solve(A, [si, sj])
                    if np.abs(B @ c).max() <= 1 + 1e-12:
                        best = max(best, c @ u)
    assert dual_norm(sec, u) == pytest.approx(best, rel=1e-10)


def test_induced_dual_bounded_by_conjugate_norm():
    spec = leading_spectrum(make_system("torus1"), 9)
    q = 4.0
    body = NormBody.induced(spec, q)
    rng = np.random.default_rng(4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        for alpha in rng.standard_normal((100, 9)):
            est = induced_dual_norm(body, alpha, seed=1)
            upper = induced_norm(spec, alpha, conjugate(q))
            # beta = alpha is feasible after scaling
            lower = alpha @ alpha / induced_norm(spec, alpha, q)
            assert est.lower_bound
            assert lower - 1e-9 <= est.value <= upper * (1 + 1e-4)


@pytest.mark.parametrize("n,value", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3), (4, math.pi ** 2 / 2)])
def test_ball_volume(n, value):
    assert ball_volume(n) == pytest.approx(value, rel=1e-14)


def test_mc_volume_closed_forms():
    assert within(mc_volume(NormBody.lp(3, math.inf), samples=100_000, seed=1), 8.0)
    assert within(mc_volume(NormBody.lp(3, 1), samples=100_000, seed=2), 8 / 6)
    ball = mc_volume(NormBody.euclidean(4), samples=10_000, seed=3)
    assert ball.value == pytest.approx(math.pi ** 2 / 2) and ball.stderr == 0.0
    for p in (1.5, 3.0):
        assert within(mc_volume(NormBody.lp(3, p), samples=100_000, seed=4), lp_ball_volume(3, p))


def test_mc_volume_of_sections():
    e = np.eye(3)
    cube = NormBody.lp(3, math.inf)
    assert within(mc_volume(cube, Subspace.span(e[:, :2]), 100_000, seed=5), 4.0)
    # plane orthogonal to (1,1,1) cuts the cube in a regular hexagon of area 3 sqrt3
    L = Subspace.span(np.array([[1, -1, 0], [1, 1, -2]], dtype=float).T)
    assert within(mc_volume(cube, L, 100_000, seed=6), 3 * math.sqrt(3))
    off = mc_volume(NormBody.euclidean(3), Subspace.span(e[:, :2]), 1000, seed=7, offset=0.5 * e[2])
    assert off.value == pytest.approx(0.75 * math.pi)


def test_mc_volume_deterministic_and_validates():
    body = NormBody.lp(3, 1)
    assert mc_volume(body, samples=5000, seed=9) == mc_volume(body, samples=5000, seed=9)
    with pytest.raises(ValueError):
        mc_volume(body, samples=0)


def test_stderr_halves_with_fourfold_samples():
    body = NormBody.lp(3, 1)
    a = mc_volume(body, samples=50_000, seed=10)
    b = mc_volume(body, samples=200_000, seed=10)
    assert b.stderr / a.stderr == pytest.approx(0.5, rel=0.05)


def test_volume_monotone_and_scaling():
    inner, outer = NormBody.lp(4, 1), NormBody.lp(4, 2)
    x = np.random.default_rng(11).standard_normal((1000, 4))
    assert np.all(norm(inner, x) >= norm(outer, x) - 1e-12)
    vi, vo = mc_volume(inner, samples=50_000, seed=12), mc_volume(outer, samples=50_000, seed=13)
    assert vi.value <= vo.value + 3 * math.hypot(vi.stderr, vo.stderr)
    body = NormBody.lp(3, 3)
    base = mc_volume(body, samples=100_000, seed=14)
    big = mc_volume(body.scaled(1.5), samples=100_000, seed=15)
    assert abs(big.value - 1.5 ** 3 * base.value) <= 3 * math.hypot(big.stderr, 1.5 ** 3 * base.stderr)


def test_induced_circumradius_is_valid():
    spec = leading_spectrum(make_system("torus1"), 9)
    for p in (1.0, 1.5, 4.0):
        body = NormBody.induced(spec, p)
        u = sphere_sample(9, 2000, 16)
        # every unit vector has norm >= 1 / R, i.e. the body lies inside R * B
        assert np.all(norm(body, u) >= 1 / body.circumradius - 1e-12)


def test_diameter_examples():
    L = random_subspace(5, 3, seed=17)
    d = diameter_of_section(NormBody.euclidean(5), L)
    assert d.value == pytest.approx(2.0) and np.linalg.norm(d.witness) == pytest.approx(1.0)
    e = np.eye(3)
    ell = diameter_of_section(NormBody.from_semi_axes([1, 0.5, 1 / 3]), Subspace.span(e[:, :2]))
    assert ell.value == pytest.approx(2.0)
    assert abs(abs(ell.witness[0]) - 1) < 1e-12
    diag = Subspace.span(np.array([[1.0], [1.0]]) / math.sqrt(2))
    sq = diameter_of_section(NormBody.lp(2, math.inf), diag)
    assert sq.value == pytest.approx(2 * math.sqrt(2))
    np.testing.assert_allclose(np.abs(sq.witness), [1, 1])


def _sampled_radius(body, L, count=200_000, seed=0):
    u = sphere_sample(L.dim, count, seed)
    return 2 * np.max(1 / norm(body.section(L), u))


@pytest.mark.parametrize("body", [NormBody.lp(4, 1), NormBody.lp(4, math.inf), NormBody.lp(4, 3)])
def test_diameter_against_sampling_oracle(body):
    L = random_subspace(4, 2, seed=18)
    d = diameter_of_section(body, L, seed=1)
    sampled = _sampled_radius(body, L)
    assert sampled <= d.value * (1 + 1e-9)
    assert d.value <= sampled * (1 + 1e-3)
    assert norm(body, d.witness) == pytest.approx(1.0, abs=1e-8)
    assert L.residual(d.witness) < 1e-10


def test_diameter_monotone_in_subspace():
    rng = np.random.default_rng(19)
    body = NormBody.lp(5, 1)
    big = random_subspace(5, 3, seed=20)
    small = Subspace.span(big.basis @ rng.standard_normal((3, 2)))
    assert diameter_of_section(body, small).value <= diameter_of_section(body, big).value + 1e-8


def test_induced_diameter_witness_on_boundary():
    spec = leading_spectrum(make_system("torus1"), 9)
    body = NormBody.induced(spec, 4)
    L = random_subspace(9, 3, seed=21)
    d = diameter_of_section(body, L, restarts=8)
    assert induced_norm(spec, d.witness, 4) == pytest.approx(1.0, abs=1e-8)
    assert d.value <= 2 * body.circumradius + 1e-12


def test_norm_grad_finite_differences():
    rng = np.random.default_rng(22)
    x = rng.standard_normal(4)
    for body in (NormBody.lp(4, 3), NormBody.from_semi_axes([1, 2, 3, 4])):
        fd = [(norm(body, x + 1e-6 * e) - norm(body, x - 1e-6 * e)) / 2e-6 for e in np.eye(4)]
        np.testing.assert_allclose(norm_grad(body, x), fd, atol=1e-6)


bodies = st.sampled_from([
    NormBody.lp(4, 1), NormBody.lp(4, 2.5), NormBody.lp(4, math.inf, scale=0.5),
    NormBody.from_semi_axes([1, 0.2, 3, 0.7]),
])
vecs = st.lists(st.floats(-100, 100, allow_nan=False), min_size=4, max_size=4).map(np.array)


@settings(max_examples=60, deadline=None)
@given(bodies, vecs, vecs, st.floats(-10, 10, allow_nan=False))
def test_norm_axioms(body, a, b, c):
    na = norm(body, a)
    assert na >= 0
    assert (na == 0) == (not np.any(a))
    assert norm(body, -a) == pytest.approx(na, rel=1e-12, abs=1e-300)
    assert norm(body, c * a) == pytest.approx(abs(c) * na, rel=1e-10, abs=1e-10)
    assert norm(body, a + b) <= na + norm(body, b) + 1e-9 * (1 + na)


@pytest.mark.parametrize("p", [1, math.inf])
def test_vertex_support_matches_linear_programme(p):
    from flatpoly.bodies import _section_support

    sec = NormBody.lp(6, p).section(random_subspace(6, 3, seed=23))
    u = np.random.default_rng(24).standard_normal((20, 3))
    lp_values = [_section_support(sec, row)[0] for row in u]
    np.testing.assert_allclose(dual_norm(sec, u), lp_values, rtol=1e-8)


@pytest.mark.parametrize("body", [NormBody.lp(3, 1), NormBody.lp(3, 3), NormBody.lp(3, math.inf)])
def test_line_section_dual_matches_linear_programme(body):
    from flatpoly.bodies import _section_support

    sec = body.section(random_subspace(3, 1, seed=25))
    u = np.array([[0.7], [-2.0]])
    expected = [_section_support(sec, row)[0] for row in u]
    np.testing.assert_allclose(dual_norm(sec, u), expected, rtol=1e-7)
