import math

import numpy as np
import pytest

from bszeta.bsstats import (CHUNK, DomainSampler, bs_estimate, bs_probability, dirichlet_membership,
                            inj_rad, orbit_count_statistic, orbit_estimate, sample_profile,
                            sample_quotient_point, stats_ball, thread_count, wilson_interval)
from bszeta.fuchsian import IncompleteBall, cyclic_cover, enumerate_ball, trace_for_length
from bszeta.hypgeom import HPoint, act_np

SYS = 2 * math.acosh(1 + math.sqrt(2))


@pytest.fixture(scope="module")
def ball(bolza, bolza_domain):
    return stats_ball(bolza, 3.4, domain=bolza_domain)


def test_membership(bolza, ball):
    assert dirichlet_membership(bolza, ball, 0.0)
    for g in bolza.generators:
        img = act_np(g.as_array()[None], np.array([0j]))[0, 0]
        assert not dirichlet_membership(bolza, ball, img)


def test_sampler_deterministic(bolza, ball):
    a = DomainSampler(bolza, ball, seed=5).sample(5000)
    b = DomainSampler(bolza, ball, seed=5).sample(5000)
    c = DomainSampler(bolza, ball, seed=6).sample(5000)
    assert np.array_equal(a[0], b[0])
    assert not np.array_equal(a[0], c[0])


def test_sampler_chunks_compose(bolza, ball):
    s = DomainSampler(bolza, ball, seed=9)
    z, _ = s.sample(CHUNK + 10)
    z0, _ = s.chunk(0)
    z1, _ = s.chunk(1)
    assert np.array_equal(z, np.concatenate([z0, z1[:10]]))


def test_samples_in_domain(bolza, ball, bolza_domain):
    z, sheets = DomainSampler(bolza, ball, seed=1).sample(3000)
    assert np.all(bolza_domain.contains(z))
    assert np.all(sheets == 0)
    cov = cyclic_cover(bolza, 4, weights=[1, 2, 3, 4])
    _, sheets = DomainSampler(bolza, ball, seed=1, cover=cov).sample(3000)
    assert set(np.unique(sheets)) == {0, 1, 2, 3}


def test_next_point(bolza, ball):
    s = DomainSampler(bolza, ball, seed=2)
    z, k = s.next()
    assert abs(z) < 1 and k == 0
    p = sample_quotient_point(DomainSampler(bolza, ball, seed=2))
    assert isinstance(p, HPoint)


def test_area_uniform(bolza, ball, bolza_domain):
    # a centered disk of radius r inside the domain holds area 2 pi (cosh r - 1) of 4 pi
    r = 0.9 * bolza_domain.inradius
    z, _ = DomainSampler(bolza, ball, seed=3).sample(40000)
    rho = 2 * np.arctanh(np.abs(z))
    p = 2 * math.pi * (math.cosh(r) - 1) / (4 * math.pi)
    frac = float(np.mean(rho <= r))
    assert abs(frac - p) < 5 * math.sqrt(p * (1 - p) / len(z))


def test_inj_rad_center(bolza, ball):
    r = inj_rad(bolza, ball, 0.0)
    assert r.value == pytest.approx(SYS / 2, rel=1e-12)
    assert not r.lower_bound_only


def test_inj_rad_at_least_half_systole(bolza, ball):
    z, _ = DomainSampler(bolza, ball, seed=4).sample(200)
    for zz in z[:50]:
        assert inj_rad(bolza, ball, zz).value >= SYS / 2 - 1e-9


def test_inj_rad_cover_is_larger(bolza, ball):
    cov = cyclic_cover(bolza, 2, weights=[1, 2, 3, 4])
    z, _ = DomainSampler(bolza, ball, seed=4).sample(50)
    for zz in z:
        base = inj_rad(bolza, ball, zz)
        for sheet in (0, 1):
            up = inj_rad(bolza, ball, zz, cover=cov, sheet=sheet)
            assert up.value >= base.value - 1e-12


def test_small_ball_is_reported(bolza, bolza_domain):
    small = enumerate_ball(bolza, trace_for_length(3.1), domain=bolza_domain)
    with pytest.raises(IncompleteBall):
        sample_profile(bolza, small, 100, seed=1, R_grid=[1.6], c_grid=[20.0])


def test_bs_probability_hard_bound_and_monotone(bolza, ball):
    assert bs_probability(bolza, ball, SYS / 2 - 1e-6, 4000, seed=2).p_hat == 0.0
    prof = sample_profile(bolza, ball, 4000, seed=2, R_grid=[1.6], c_grid=[3.2])
    ps = [bs_estimate(prof, R).p_hat for R in (1.4, 1.5, 1.6, 1.7)]
    assert ps == sorted(ps)
    est = bs_estimate(prof, 1.6)
    assert est.ci95[0] <= est.p_hat <= est.ci95[1]
    assert est.hits == round(est.p_hat * est.n)


def test_orbit_count_zero_below_systole(bolza, ball):
    est = orbit_count_statistic(bolza, ball, SYS - 1e-6, 4000, seed=2)
    assert est.value == 0.0 and est.stderr == 0.0


def test_orbit_count_positive_above(bolza, ball):
    est = orbit_count_statistic(bolza, ball, 3.2, 4000, seed=2)
    assert est.value > 0 and est.stderr > 0 and est.n == 4000


def test_thread_count_invariance(bolza, ball):
    cov = cyclic_cover(bolza, 2, weights=[1, 2, 3, 4])
    kw = dict(cover=cov, R_grid=[1.6], c_grid=[3.2])
    one = sample_profile(bolza, ball, 2 * CHUNK + 7, seed=11, threads=1, **kw)
    many = sample_profile(bolza, ball, 2 * CHUNK + 7, seed=11, threads=3, **kw)
    assert np.array_equal(one.min_disp, many.min_disp)
    assert np.array_equal(one.counts, many.counts)


def test_nested_covers_pointwise(bolza, ball):
    # covers of degree 2 and 4 from one homomorphism to Z: stabilizers shrink
    kw = dict(R_grid=[1.6], c_grid=[3.2])
    p1 = sample_profile(bolza, ball, 3000, seed=8, **kw)
    p2 = sample_profile(bolza, ball, 3000, seed=8, cover=cyclic_cover(bolza, 2, weights=[1, 2, 3, 4]), **kw)
    p4 = sample_profile(bolza, ball, 3000, seed=8, cover=cyclic_cover(bolza, 4, weights=[1, 2, 3, 4]), **kw)
    assert np.all(p1.min_disp <= p2.min_disp) and np.all(p2.min_disp <= p4.min_disp)
    assert np.all(p1.counts >= p2.counts) and np.all(p2.counts >= p4.counts)
    assert orbit_estimate(p4, 0).value <= orbit_estimate(p1, 0).value


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 0) == (0.0, 1.0)
    assert wilson_interval(100, 100)[1] == 1.0


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("BSZETA_THREADS", "2")
    assert thread_count(8) == 2
    assert thread_count(None) <= 2
    monkeypatch.delenv("BSZETA_THREADS")
    assert thread_count(3) == 3


def test_invalid_arguments(bolza, ball):
    with pytest.raises(ValueError):
        bs_probability(bolza, ball, 0.0, 10, seed=1)
    with pytest.raises(ValueError):
        orbit_count_statistic(bolza, ball, -1.0, 10, seed=1)
