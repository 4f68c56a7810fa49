import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad as adaptive_quad
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from flatpoly.harmonics import leading_spectrum, make_system, spectrum_up_to
from flatpoly.norms import (
    InsufficientQuadrature,
    Polynomial,
    check_kernel_identity,
    exact_rule,
    induced_norm,
    induced_norm_grad,
    kernel_column,
    linf_estimate,
    linf_norm,
    lp_error_budget,
    lp_norm,
    nikolskii_bound,
    nikolskii_check,
    sphere_rule,
    torus_rule,
)


def wallis_norm(p):
    """``||sqrt2 cos||_p`` under the normalized measure (Gamma closed form)."""
    log_int = p / 2 * math.log(2) + gammaln((p + 1) / 2) - 0.5 * math.log(math.pi) - gammaln(p / 2 + 1)
    return math.exp(log_int / p)


def test_wallis_oracle_matches_adaptive_quadrature():
    for p in (1, 2.5, 3, 4):
        val = adaptive_quad(lambda t: abs(math.sqrt(2) * math.cos(t)) ** p, 0, 2 * math.pi, limit=200)[0]
        assert (val / (2 * math.pi)) ** (1 / p) == pytest.approx(wallis_norm(p), rel=1e-10)


T1 = make_system("torus1")
SPEC9 = leading_spectrum(T1, 9)


def _unit(spec, i):
    e = np.zeros(spec.n)
    e[i] = 1.0
    return e


def test_quadrature_weights_sum_to_one():
    for rule in (torus_rule(1, 17), torus_rule(2, 9), sphere_rule(6, 11)):
        assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(rule.weights > 0)


@pytest.mark.parametrize("p", [1, 3, 4, 7.5])
def test_constant_has_unit_norm(p):
    for name, n in (("torus1", 9), ("torus2", 13), ("sphere2", 16)):
        spec = leading_spectrum(make_system(name), n)
        assert lp_norm(Polynomial(spec, _unit(spec, 0)), p) == pytest.approx(1.0, abs=1e-12)


def test_cosine_four_norm_pinned():
    # (integral of (1 + cos 2x)^2 over the normalized circle)^(1/4) = (3/2)^(1/4)
    e1 = _unit(SPEC9, 1)
    assert lp_norm(Polynomial(SPEC9, e1), 4) == pytest.approx(1.5 ** 0.25, abs=1e-12)
    assert lp_norm(Polynomial(SPEC9, e1), 4) == pytest.approx(1.1066819197003215, abs=1e-12)


@pytest.mark.parametrize("p", [4, 6, 8])
def test_even_p_unit_vectors_match_wallis(p):
    for i in range(1, SPEC9.n):
        assert induced_norm(SPEC9, _unit(SPEC9, i), p) == pytest.approx(wallis_norm(p), abs=1e-12)


@pytest.mark.parametrize("p", [1, 2.5, 3])
def test_non_even_p_within_reported_budget(p):
    for i in range(1, SPEC9.n):
        e = _unit(SPEC9, i)
        err = abs(induced_norm(SPEC9, e, p) - wallis_norm(p))
        assert err <= 2 * lp_error_budget(SPEC9, e, p) + 1e-12


def test_even_p_budget_is_zero():
    assert lp_error_budget(SPEC9, _unit(SPEC9, 1), 4) == 0.0


def test_insufficient_exactness_rejected():
    poly = Polynomial(SPEC9, _unit(SPEC9, 1))
    with pytest.raises(InsufficientQuadrature):
        lp_norm(poly, 4, torus_rule(1, 12))


def test_quadrature_invariance_under_refinement():
    rng = np.random.default_rng(0)
    spec = leading_spectrum(T1, 17)
    alpha = rng.standard_normal(17)
    base = induced_norm(spec, alpha, 6)
    finer = induced_norm(spec, alpha, 6, torus_rule(1, 2 * (6 * spec.degree + 1)))
    assert abs(base - finer) < 1e-10


@pytest.mark.parametrize("name,n", [("torus1", 65), ("torus2", 49), ("torus3", 57), ("sphere2", 100)])
def test_parseval_random_vectors(name, n):
    spec = leading_spectrum(make_system(name), n)
    alphas = np.random.default_rng(1).standard_normal((1000, n))
    dev = np.abs(induced_norm(spec, alphas, 2) - np.linalg.norm(alphas, axis=1)).max()
    assert dev < 1e-10


def test_linf_closed_forms():
    assert linf_norm(Polynomial(SPEC9, _unit(SPEC9, 1))) == pytest.approx(math.sqrt(2), abs=1e-12)
    spec3 = leading_spectrum(T1, 3)
    assert linf_norm(Polynomial(spec3, kernel_column(spec3))) == pytest.approx(3.0, abs=1e-12)


def test_linf_bounds_bracket_dense_grid_oracle():
    rng = np.random.default_rng(2)
    spec = leading_spectrum(T1, 33)
    alphas = rng.standard_normal((20, 33))
    est = linf_estimate(spec, alphas)
    # oracle: dense grid, then bounded scalar polish of the best node
    dense = np.linspace(0, 2 * np.pi, 200_001)
    vals = np.abs(spec.design(dense[:, None]) @ alphas.T)
    h = dense[1]
    truth = []
    for j, t0 in enumerate(dense[vals.argmax(axis=0)]):
        res = minimize_scalar(lambda t: -abs(spec.design(np.array([[t]]))[0] @ alphas[j]),
                              bounds=(t0 - h, t0 + h), method="bounded", options={"xatol": 1e-13})
        truth.append(max(-res.fun, vals[:, j].max()))
    truth = np.array(truth)
    assert np.all(est.value <= truth * (1 + 1e-12))
    assert np.all(est.upper >= truth)
    assert np.all(est.value >= truth * (1 - 1e-8))


def test_linf_on_sphere_against_dense_sampling():
    s2 = make_system("sphere2")
    spec = spectrum_up_to(s2, 5)
    alpha = np.random.default_rng(3).standard_normal(spec.n)
    pts = s2.random_points(400_000, np.random.default_rng(4))
    sampled = np.abs(spec.design(pts) @ alpha).max()
    est = linf_estimate(spec, alpha)
    assert sampled <= est.upper + 1e-9
    assert est.value >= sampled - 1e-3 * sampled


def test_norm_monotone_in_p():
    rng = np.random.default_rng(5)
    spec = leading_spectrum(T1, 33)
    alphas = rng.standard_normal((50, 33))
    vals = [induced_norm(spec, alphas, p) for p in (1, 2, 4, 8)] + [induced_norm(spec, alphas, math.inf)]
    for lo, hi in zip(vals, vals[1:]):
        assert np.all(lo <= hi * (1 + 1e-9))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    spec = leading_spectrum(T1, 17)
    alpha = rng.standard_normal(17)
    for p in (3, 4):
        g = induced_norm_grad(spec, alpha, p)
        h = 1e-6
        fd = np.array([(induced_norm(spec, alpha + h * e, p) - induced_norm(spec, alpha - h * e, p)) / (2 * h)
                       for e in np.eye(17)])
        np.testing.assert_allclose(g, fd, atol=1e-6)


def test_linf_subgradient_is_supporting():
    rng = np.random.default_rng(7)
    spec = leading_spectrum(T1, 17)
    alpha = rng.standard_normal(17)
    g = induced_norm_grad(spec, alpha, math.inf)
    beta = rng.standard_normal((30, 17))
    # a subgradient of a norm satisfies <g, beta> <= ||beta||
    assert np.all(beta @ g <= induced_norm(spec, beta, math.inf) + 1e-9)


@pytest.mark.parametrize("n", [33, 65])
def test_nikolskii_kernel_attains_sqrt_n(n):
    res = nikolskii_check(leading_spectrum(T1, n), math.inf, 2, trials=2000, seed=0)
    assert res.passed
    assert res.kernel_ratio == pytest.approx(math.sqrt(n), abs=1e-6)
    assert res.max_ratio <= math.sqrt(n)


def test_nikolskii_inf_one_and_trivial_pairs():
    spec = leading_spectrum(T1, 33)
    res = nikolskii_check(spec, math.inf, 1, trials=1000, seed=1)
    assert res.passed and res.bound == pytest.approx(33.0)
    same = nikolskii_check(spec, 4, 4, trials=100, seed=2)
    assert same.max_ratio == pytest.approx(1.0) and same.bound == 1.0
    rev = nikolskii_check(spec, 2, math.inf, trials=100, seed=3)
    assert rev.bound == 1.0 and rev.max_ratio <= 1.0


def test_nikolskii_bound_exponent():
    assert nikolskii_bound(100, math.inf, 2) == pytest.approx(10.0)
    assert nikolskii_bound(100, 4, 2) == pytest.approx(100 ** 0.25)
    assert nikolskii_bound(100, 2, 4) == 1.0


def test_kernel_identity_sphere():
    s2 = make_system("sphere2")
    spec = spectrum_up_to(s2, 8)
    assert check_kernel_identity(spec, s2.random_points(200, np.random.default_rng(8))) < 1e-10


def test_exact_rule_exactness_declared():
    for name in ("torus1", "torus2", "sphere2"):
        rule = exact_rule(make_system(name), 12)
        assert rule.exactness >= 12


coeff_vectors = st.lists(st.floats(-10, 10, allow_nan=False), min_size=9, max_size=9).map(np.array)


@settings(max_examples=40, deadline=None)
@given(coeff_vectors, coeff_vectors, st.floats(-5, 5, allow_nan=False), st.sampled_from([1.0, 3.0, 4.0, math.inf]))
def test_induced_norm_axioms(a, b, c, p):
    na, nb = induced_norm(SPEC9, a, p), induced_norm(SPEC9, b, p)
    assert na >= 0
    assert induced_norm(SPEC9, -a, p) == pytest.approx(na, rel=1e-12, abs=1e-12)
    assert induced_norm(SPEC9, c * a, p) == pytest.approx(abs(c) * na, rel=1e-9, abs=1e-9)
    assert induced_norm(SPEC9, a + b, p) <= na + nb + 1e-9 * (1 + na + nb)
