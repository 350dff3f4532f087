import math

import numpy as np
import pytest

from impgeod import BackgroundGeodesic, PreconditionError, SeedData, make_background, metric_norm
from impgeod.background import HYPERBOLIC, LINEAR, TRIG, background_state, crossing_times, seed_family_data
from impgeod.core import constraint_F, constraint_rate, random_seed

BRANCHES = [(3.0, 1, TRIG), (-3.0, -1, TRIG), (3.0, -1, HYPERBOLIC), (-3.0, 1, HYPERBOLIC),
            (3.0, 0, LINEAR), (-3.0, 0, LINEAR)]


def test_state_examples(ds):
    geo = BackgroundGeodesic.from_seed(SeedData(0, [1, 0, 0], 1, 0, [0, 1, 0], 1), ds)
    t = np.linspace(-3, 3, 7)
    assert np.allclose(geo.u_of(t)[0], np.sin(t), atol=1e-15)
    geo0 = BackgroundGeodesic.from_seed(SeedData(0, [1, 0, 0], 2, 0.25, [0, 1, 0], 0), ds)
    assert np.allclose(geo0.u_of(t)[0], 2 * t)
    bg2 = make_background(0.75)  # a = 2
    z0 = np.array([2.0, 0.0, 0.0])
    zd = np.array([0.0, 1.0, 0.0])
    seed = SeedData(0.0, z0, 3.0, (zd @ zd - 1) / 6.0, zd, 1)
    geo2 = BackgroundGeodesic.from_seed(seed, bg2)
    assert background_state(geo2, math.pi).U == pytest.approx(6.0, rel=1e-14)


@pytest.mark.parametrize("lam,e,branch", BRANCHES)
def test_branch_invariants(lam, e, branch, rng, zero, bump):
    bg = make_background(lam)
    t = np.linspace(-2 * math.pi * bg.a, 2 * math.pi * bg.a, 200)
    for _ in range(10):
        geo = BackgroundGeodesic.from_seed(random_seed(bg, e, rng), bg)
        assert geo.branch == branch
        pos, vel = geo.evaluate(t)
        # x'' + kappa x = 0, with x'' by differentiating the closed form once more
        h = 1e-4
        _, v_plus = geo.evaluate(t + h)
        _, v_minus = geo.evaluate(t - h)
        acc = (v_plus - v_minus) / (2 * h)
        scale = 1.0 + np.max(np.abs(pos))
        assert np.max(np.abs(acc + geo.kappa * pos)) <= 1e-6 * scale
        assert np.max(np.abs(constraint_F(pos, bg))) <= 1e-10 * scale ** 2
        assert np.max(np.abs(constraint_rate(pos, bg, vel))) <= 1e-10 * scale ** 2
        nrm = metric_norm(pos, 0.1, zero, bump, bg, vel=vel)
        assert np.max(np.abs(nrm - e)) <= 1e-10 * scale ** 2


def test_exact_oscillator_identity(ds, rng):
    geo = BackgroundGeodesic.from_seed(random_seed(ds, 1, rng), ds)
    c, s, dc, ds_ = geo._basis(np.linspace(-5, 5, 11))
    assert np.allclose(dc, -s * geo.kappa, atol=1e-15)


def test_trig_periodicity(rng):
    for lam in (3.0, 0.75, -0.3):
        bg = make_background(lam)
        e = bg.sigma
        geo = BackgroundGeodesic.from_seed(random_seed(bg, e, rng), bg)
        t = np.linspace(-3, 3, 31)
        p1, v1 = geo.evaluate(t)
        p2, v2 = geo.evaluate(t + 2 * math.pi * bg.a)
        assert np.max(np.abs(p1 - p2)) <= 1e-10 * (1 + np.max(np.abs(p1)))
        assert np.max(np.abs(v1 - v2)) <= 1e-10 * (1 + np.max(np.abs(v1)))


def test_crossing_times_examples(ds):
    geo = BackgroundGeodesic.from_seed(SeedData(0, [1, 0, 0], 1, 0, [0, 1, 0], 1), ds)
    ev = crossing_times(geo, 0.0, (-1, 7))
    assert [round(x.t, 12) for x in ev] == [0.0, round(math.pi, 12), round(2 * math.pi, 12)]
    assert [x.direction for x in ev] == [1, -1, 1]
    lin = BackgroundGeodesic.from_seed(SeedData(0, [1, 0, 0], 2, 0.25, [0, 1, 0], 0), ds)
    (x,) = crossing_times(lin, -0.1, (-1, 1))
    assert x.t == pytest.approx(-0.05, abs=1e-15) and x.direction == 1
    with pytest.raises(ValueError):
        crossing_times(geo, 0.0, (1, 0))


def test_hyperbolic_crossings_monotone(ds, rng):
    for _ in range(10):
        geo = BackgroundGeodesic.from_seed(random_seed(ds, -1, rng), ds)
        for level in (-0.3, 0.0, 0.3):
            inc = [x for x in crossing_times(geo, level, (-6, 6)) if x.direction == 1]
            assert len(inc) <= 1


def _brute_force(geo, level, window, dt=1e-4):
    t = np.arange(window[0], window[1] + dt, dt)
    u = geo.u_of(t)[0] - level
    idx = np.nonzero(np.sign(u[:-1]) * np.sign(u[1:]) < 0)[0]
    return t[idx]


@pytest.mark.parametrize("lam,e,branch", BRANCHES)
def test_crossing_times_match_scan(lam, e, branch, rng):
    bg = make_background(lam)
    for _ in range(5):
        geo = BackgroundGeodesic.from_seed(random_seed(bg, e, rng), bg)
        for level in (-0.05, 0.02, 0.4):
            ev = [x for x in crossing_times(geo, level, (-6, 6)) if not x.tangential]
            scan = _brute_force(geo, level, (-6, 6))
            assert len(ev) == len(scan)
            for x, s in zip(ev, scan):
                assert s - 1e-9 <= x.t <= s + 1e-4 + 1e-9
                assert abs(geo.u_of(x.t)[0] - level) <= 1e-12 * (1 + abs(level))


def test_tangential_crossing_is_flagged(ds):
    geo = BackgroundGeodesic.from_seed(SeedData(0, [1, 0, 0], 1, 0, [0, 1, 0], 1), ds)
    (ev,) = crossing_times(geo, 1.0, (0, 3))  # U = sin t touches 1 at pi/2
    assert ev.tangential and ev.t == pytest.approx(math.pi / 2, abs=1e-7)


def test_seed_family_data_examples(ds):
    trig = BackgroundGeodesic.from_seed(SeedData(0, [1, 0, 0], 1, 0, [0, 1, 0], 1), ds)
    lin = BackgroundGeodesic.from_seed(SeedData(0, [1, 0, 0], 1, 0.5, [0, 1, 0], 0), ds)
    for eps in (0.5, 1e-2, 1e-5):
        assert seed_family_data(trig, eps).t == pytest.approx(-math.asin(eps), rel=1e-14)
        assert seed_family_data(lin, eps).t == pytest.approx(-eps, rel=1e-14)
        assert seed_family_data(trig, eps).U == pytest.approx(-eps, rel=1e-13)
    with pytest.raises(PreconditionError):
        seed_family_data(trig, 1.5)


@pytest.mark.parametrize("lam,e,branch", BRANCHES)
def test_entry_parameter_asymptotics(lam, e, branch, rng):
    bg = make_background(lam)
    seed = random_seed(bg, e, rng)
    geo = BackgroundGeodesic.from_seed(seed, bg)
    for eps in (1e-4, 1e-6):
        s = seed_family_data(geo, eps)
        assert s.t < 0
        assert s.t / eps == pytest.approx(-1 / seed.U0dot, rel=10 * eps)
        assert s.U == pytest.approx(-eps, rel=1e-12)
