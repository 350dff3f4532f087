import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from impgeod import ConfigError, delta_eval, delta_prime_eval, make_mollifier, profile_catalog
from impgeod.fitting import loglog_slope
from impgeod.profiles import ball_norms_by_sampling

MOLLIFIERS = [("bump", []), ("polynomial", [4]), ("polynomial", [2.5]), ("skewed_bump", [0.5])]


@pytest.fixture(params=MOLLIFIERS, ids=lambda p: p[0] + str(p[1]))
def moll(request):
    return make_mollifier(*request.param)


def test_support_and_mass(moll):
    assert np.all(moll.rho(np.array([-1.0, 1.0, -1.5, 2.0])) == 0.0)
    mass, _ = integrate.quad(lambda x: float(moll.rho(x)), -1, 1, epsabs=1e-13, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-10)


def test_sup_norms_dominate_dense_grid(moll):
    x = np.linspace(-1, 1, 200001)
    assert np.max(np.abs(moll.rho(x))) <= moll.sup_rho * (1 + 1e-12)
    assert np.max(np.abs(moll.rho_prime(x))) <= moll.sup_rho_prime * (1 + 1e-12)


def test_rho_prime_matches_finite_differences(moll):
    x = np.linspace(-0.95, 0.95, 41)
    h = 1e-6
    fd = (moll.rho(x + h) - moll.rho(x - h)) / (2 * h)
    assert np.allclose(moll.rho_prime(x), fd, rtol=1e-6, atol=1e-8)


def test_bump_normalization_against_mpmath(bump):
    mass = mpmath.quad(lambda x: mpmath.exp(-1 / (1 - x * x)), [-1, 0, 1])
    c = float(1 / mass)
    assert c == pytest.approx(2.2523, abs=5e-5)
    assert delta_eval(bump, 1.0, 0.0) == pytest.approx(c * math.exp(-1), rel=1e-12)


def test_delta_examples(bump):
    assert delta_eval(bump, 0.1, 0.2) == 0.0
    for eps in (1.0, 0.1, 0.01):
        m, _ = integrate.quad(lambda x: float(delta_eval(bump, eps, x)), -eps, eps,
                              epsabs=1e-13, limit=200)
        assert m == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        delta_eval(bump, 0.0, 0.1)
    with pytest.raises(ValueError):
        delta_prime_eval(bump, -1.0, 0.1)


def test_delta_prime_examples(moll):
    if moll.is_even:
        assert delta_prime_eval(moll, 0.3, 0.0) == 0.0
    for eps in (1.0, 0.1):
        i0, _ = integrate.quad(lambda x: float(delta_prime_eval(moll, eps, x)), -eps, eps,
                               epsabs=1e-11, limit=400)
        i1, _ = integrate.quad(lambda x: x * float(delta_prime_eval(moll, eps, x)), -eps, eps,
                               epsabs=1e-11, limit=400)
        assert i0 == pytest.approx(0.0, abs=1e-9)
        assert i1 == pytest.approx(-1.0, abs=1e-8)


def test_delta_scaling(moll, rng):
    x = rng.uniform(-2, 2, 50)
    for eps in (0.3, 0.01):
        assert np.allclose(moll.delta(x, eps), moll.delta(x / eps, 1.0) / eps, rtol=1e-14, atol=0)


@pytest.mark.parametrize("name,params", [("bump", []), ("skewed_bump", [0.5])])
def test_delta_net_converges_at_least_first_order(name, params):
    moll = make_mollifier(name, params)
    phi = math.exp  # phi(0) = 1; all Taylor terms share a sign, so no cancellation
    eps = np.array([0.2, 0.1, 0.05, 0.025])
    errs = []
    for e in eps:
        val, _ = integrate.quad(lambda x: phi(x) * float(moll.delta(x, e)), -e, e, epsabs=1e-14)
        errs.append(abs(val - 1.0))
    slope = loglog_slope(eps, errs)
    assert slope >= 0.95
    if moll.is_even:
        assert slope == pytest.approx(2.0, abs=0.05)


def test_mollifier_catalog_errors():
    with pytest.raises(ConfigError, match="catalog"):
        make_mollifier("tophat")
    with pytest.raises(ConfigError):
        make_mollifier("polynomial", [1])
    with pytest.raises(ConfigError):
        make_mollifier("skewed_bump", [1.2])
    assert make_mollifier("skewed_bump", [0.4]).reflected().kernel_params[1] == -0.4


def test_profile_catalog_examples():
    q = profile_catalog("quadratic", [1, -1, 0])
    assert np.array_equal(q.DH(np.array([1.0, 2.0, 3.0])), [2.0, -4.0, 0.0])
    assert profile_catalog("zero").ball_norms(np.ones(3), 7.0) == (0.0, 0.0)
    assert profile_catalog("constant", [5]).ball_norms(np.zeros(3), 1.0) == (5.0, 0.0)
    g = profile_catalog("gaussian", [2.0, 0.5])
    assert float(g.H(np.zeros(3))) == 2.0
    with pytest.raises(ConfigError, match="catalog"):
        profile_catalog("cubic", [])
    with pytest.raises(ConfigError):
        profile_catalog("quadratic", [1, 2])


@pytest.mark.parametrize("name,params", [("quadratic", [1, -1, 0.5]), ("gaussian", [1.5, 0.7]),
                                         ("constant", [2.0]), ("zero", [])])
def test_gradient_matches_finite_differences(name, params, rng):
    p = profile_catalog(name, params)
    z = rng.normal(size=(20, 3))
    h = 1e-5
    fd = np.stack([(p.H(z + h * e) - p.H(z - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
    scale = np.maximum(1.0, np.abs(fd))
    assert np.all(np.abs(p.DH(z) - fd) <= 1e-6 * scale)


def test_ball_norms_by_sampling_examples(quad):
    q = profile_catalog("quadratic", [1, 1, 1])
    nh, ndh = ball_norms_by_sampling(q, np.zeros(3), 1.0)
    assert 1.0 <= nh <= 1.05 * (1 + 1e-12)
    assert 2.0 <= ndh <= 2.1 * (1 + 1e-12)
    assert ball_norms_by_sampling(profile_catalog("zero"), np.zeros(3), 1.0) == (0.0, 0.0)
    nh, _ = ball_norms_by_sampling(profile_catalog("constant", [3.0]), np.zeros(3), 1.0)
    assert 3.0 <= nh <= 3.0 * 1.05
    with pytest.raises(ValueError):
        ball_norms_by_sampling(q, np.zeros(3), 1.0, grid=4)
    with pytest.raises(ValueError):
        ball_norms_by_sampling(q, np.zeros(3), 0.0)


def test_ball_norms_monotone_in_radius(quad):
    center = np.array([1.0, 0.0, 0.0])
    prev = (0.0, 0.0)
    for r in (0.25, 0.5, 1.0, 2.0, 4.0):
        cur = quad.ball_norms(center, r)
        assert cur[0] >= prev[0] and cur[1] >= prev[1]
        prev = cur
