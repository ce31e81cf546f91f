import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from sterile_cp.estimators import (c0, critical_bisect, erlang_tail, gap_threshold, kill_per_try,
                                   kill_rate_q, phase_bounds, pi_equilibrium, rate_function,
                                   survival_prob)
from sterile_cp.events import ModelParams
from sterile_cp.lattice import Box
from sterile_cp.process import InitSpec


def test_pi_examples():
    assert pi_equilibrium(1, 1, 2) == pytest.approx((2 / 3, 1 / 6, 1 / 6))
    assert pi_equilibrium(1, 1, 1) == pytest.approx((0.5, 0.25, 0.25))
    assert pi_equilibrium(0, 1, 2) == pytest.approx((0, 0.5, 0.5))


@settings(max_examples=200)
@given(st.floats(0, 20), st.floats(0.01, 50), st.floats(0.001, 5), st.integers(1, 2))
def test_pi_detailed_balance(lam, theta, alpha, dim):
    p1, p0, pm = pi_equilibrium(lam, theta, dim)
    assert p1 + p0 + pm == pytest.approx(1.0)
    assert p0 * alpha == pytest.approx(pm * theta * alpha)
    assert p0 * 2 * dim * lam == pytest.approx(p1, abs=1e-12)


def test_closed_form_values():
    assert gap_threshold(0.25, 10) == pytest.approx(-math.log(400) / math.log(0.75), rel=1e-14)
    assert gap_threshold(0.25, 10) == pytest.approx(20.8267, abs=1e-4)
    assert kill_rate_q(1.0) == pytest.approx(0.0115777, abs=1e-7)
    assert kill_per_try(1.0, 2) == pytest.approx((0.632121 * 0.135335) ** 2, abs=1e-7)
    assert erlang_tail(3, 1, 1).prob == pytest.approx(1 - math.exp(-1) * 2.5, abs=1e-12)
    assert erlang_tail(1, 1, 0).prob == 0.0


@settings(max_examples=200)
@given(st.integers(1, 400), st.floats(0.01, 10), st.floats(0, 200))
def test_erlang_matches_gamma_cdf(K, lam, t):
    want = sps.gamma.cdf(t, K, scale=1 / lam)
    assert erlang_tail(K, lam, t).prob == pytest.approx(want, rel=1e-8, abs=1e-14)


def test_erlang_monte_carlo():
    rng = np.random.default_rng(0)
    s = rng.exponential(1 / 2.0, size=(200_000, 5)).sum(1)
    emp = (s <= 2.0).mean()
    p = erlang_tail(5, 2.0, 2.0).prob
    assert abs(emp - p) < 4 * math.sqrt(p * (1 - p) / s.size)


def test_erlang_large_deviation_bound():
    for K in (10, 50, 200):
        e = erlang_tail(K, 1.0, 0.3 * K)
        assert 0 < e.rate and e.prob <= e.ld_bound


@settings(max_examples=100)
@given(st.floats(1e-6, 0.999999))
def test_rate_function_positive(c):
    assert rate_function(c) > 0


def test_rate_function_zero_at_one_and_c0():
    assert rate_function(1.0) == 0.0
    c = c0()
    assert c == pytest.approx(0.0796781605, abs=1e-10)
    assert math.exp(-rate_function(c)) == pytest.approx(0.2, rel=1e-12)


def test_phase_bounds_d1():
    b = phase_bounds(10, 2, 0.5, 0.01, 2.0, 1.0)
    assert b.nu == pytest.approx(3 * b.pi[2] / 8)
    assert b.gap_fail == pytest.approx(1 / 20)
    assert b.T == pytest.approx(250)
    for v in (b.gap_fail, b.kill_try, b.fail_phase2, b.wall_success, b.closed_bound):
        assert 0 <= v <= 1
    with pytest.raises(ValueError):
        phase_bounds(10, 2, 0.5, 0.0, 2.0, 1.0)


def test_phase_bounds_limits():
    walls = [phase_bounds(K, 2, 0.5, 0.01, 2.0, 1.0).wall_success for K in (5, 10, 20, 40, 80)]
    assert all(a <= b for a, b in zip(walls, walls[1:])) and walls[-1] > 0.999
    fails = [phase_bounds(2, 2, 0.5, a, 0.0, 1.0).fail_phase2 for a in (1e-1, 1e-2, 1e-3, 1e-5)]
    assert all(a >= b for a, b in zip(fails, fails[1:]))
    assert fails[-1] == pytest.approx(phase_bounds(2, 2, 0.5, 1e-5, 0.0, 1.0).gap_fail)
    g3 = [phase_bounds(K, 2, 0.5, 0.01, 1.0, 5.0, 2, chi_hat=1.2).G3 for K in (10, 50, 100, 200)]
    assert all(a >= b for a, b in zip(g3, g3[1:])) and g3[-1] < 1e-10


def test_phase_bounds_d2():
    b = phase_bounds(50, 1, 0.1, 0.01, 1.0, 5.0, 2, chi_hat=1.1)
    assert b.q_lam == pytest.approx(kill_rate_q(1.0))
    assert b.c0 == pytest.approx(c0())
    assert b.cond1_ok == (2 * b.T / 50 <= b.c0)
    assert b.G3 == pytest.approx(min(1, 16 * 50 * 0.8 ** 50))
    with pytest.raises(ValueError):
        phase_bounds(50, 1, 0.1, 0.01, 1.0, 5.0, 2)


def test_survival_examples():
    box = Box.cube(3, 1)
    est = survival_prob("contact", ModelParams(0.0), box, InitSpec("single-one-at-origin"), 1.0,
                        20_000, 1)
    assert est.ci95[0] <= math.exp(-1) <= est.ci95[1]
    assert survival_prob("sterile", ModelParams(2.0), box, InitSpec("set"), 1.0, 10, 1).value == 0.0


def test_contact_dominates_sterile():
    box = Box.cube(20, 1)
    m = ModelParams(2.0, 1.0, 0.2)
    z = survival_prob("contact", m, box, InitSpec("all-one"), 20.0, 400, 5)
    x = survival_prob("sterile", m, box, InitSpec("all-one"), 20.0, 400, 5)
    assert z.value >= x.value


def test_survival_monotone_in_time():
    box = Box.cube(20, 1)
    m = ModelParams(1.7, 1.0, 0.05)
    vals = [survival_prob("sterile", m, box, InitSpec("single-one-at-origin"), t, 1000, 2).value
            for t in (5, 10, 20, 40)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_critical_bisect_small():
    br = critical_bisect(0.0, 1.0, Box.cube(20, 1), 15.0, 0.3, 0.1, 300, 1, lo=0.5, hi=4.0,
                         variant="contact")
    assert br.monotone_ok and br.hi - br.lo <= 0.1
    assert br.label == "finite-size proxy bracket"
    assert br.estimate.ci95 == (br.lo, br.hi)
    with pytest.raises(ValueError):
        critical_bisect(0.0, 1.0, Box.cube(20, 1), 15.0, 0.3, 0.1, 100, 1, lo=3.0, hi=4.0,
                        variant="contact")
