import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sterile_cp.events import ModelParams, build_stream
from sterile_cp.lattice import Box
from sterile_cp.process import (InitSpec, LatticeConfig, ModelVariant, comparison_chain,
                                coupled_evolve, env_minus_fraction, evolve, final_states,
                                positive_correlation, sample_initial, survival_runs)

BOX = Box.cube(4, 1)


def test_single_particle_no_births():
    box = Box.cube(1, 1)
    res = survival_runs("contact", ModelParams(0.0), box, InitSpec("single-one-at-origin"),
                        1.0, 100_000, 5)
    assert abs(res[:, 0].mean() - math.exp(-1)) < 0.004


def test_sterile_without_arrivals_is_contact():
    p = ModelParams(1.7, 1.0, 0.0)
    for seed in range(20):
        s = build_stream(p, BOX, 6.0, seed)
        init = sample_initial("product", {"probs": (0.0, 0.5, 0.5)}, BOX, seed)
        ts = np.linspace(0, 6, 13)
        a = evolve("sterile", init, s, ts)
        b = evolve("contact", init, s, ts)
        assert np.array_equal(a.configs, b.configs)


def test_environment_relaxation():
    box = Box.cube(50, 1)
    theta, alpha, t = 2.0, 0.5, 1.2
    st = final_states("env", ModelParams(0.0, theta, alpha), box, InitSpec("product", (0, 1, 0)),
                      t, 400, 11)
    frac = (st == -1).mean()
    want = env_minus_fraction(theta, alpha, t)
    se = math.sqrt(want * (1 - want) / st.size)
    assert abs(frac - want) < 4 * se


def test_initial_laws():
    big = Box.cube(20_000, 1)
    mu = sample_initial("mu_rho", {"theta": 1.0}, big, 1)
    assert abs(mu.counts()[2] / big.n_sites - 0.5) < 0.01
    assert mu.counts()[0] == 0
    ones = sample_initial("all-one", None, BOX, 1)
    assert ones.counts() == (BOX.n_sites, 0, 0)
    hits = []
    for s in range(4000):
        c = sample_initial("nu_C", {"theta": 1.0, "sites": ((0,),)}, BOX, s)
        hits.append(c[(0,)])
        others = np.delete(c.state, BOX.index((0,)))
        assert np.all(others <= 0)
    hits = np.array(hits)
    assert set(hits) == {1, -1}
    assert abs((hits == 1).mean() - 0.5) < 4 * math.sqrt(0.25 / hits.size)


def test_initial_law_validation():
    with pytest.raises(ValueError):
        InitSpec("product", (0.5, 0.6, 0.1))
    with pytest.raises(ValueError):
        InitSpec("product", (-0.1, 0.6, 0.5))
    with pytest.raises(ValueError):
        InitSpec("mu_rho")


def test_box_mismatch_rejected():
    s = build_stream(ModelParams(1.0), BOX, 1.0, 0)
    with pytest.raises(ValueError):
        evolve("contact", LatticeConfig(Box.cube(3, 1), np.ones(7)), s, [1.0])


def test_sandwich_and_contact_copies():
    p = ModelParams(2.0, 1.0, 0.5, dim=2)
    box = Box.cube(3, 2)
    init = LatticeConfig(box, np.ones(box.n_sites))
    ts = np.linspace(0, 5, 11)
    for seed in range(50):
        s = build_stream(p, box, 5.0, seed)
        trajs, rep = coupled_evolve([("remenik", init), ("sterile", init), ("contact", init)], s, ts)
        assert all(all(v) for v in rep.values())
        _, rep2 = coupled_evolve([("contact", init), ("contact", init)], s, ts, pairs=[(0, 1), (1, 0)])
        assert all(all(v) for v in rep2.values())


def test_trajectory_counts_and_csv(tmp_path):
    p = ModelParams(1.5, 1.0, 0.3)
    s = build_stream(p, BOX, 3.0, 4)
    tr = evolve("sterile", sample_initial("mu_rho", {"theta": 1.0}, BOX, 4), s, [0, 1, 2, 3])
    assert np.all(tr.counts.sum(1) == BOX.n_sites)
    tr.to_csv(tmp_path / "t.csv")
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "t,count_plus1,count_zero,count_minus1" and len(rows) == 5


ordered = st.lists(st.tuples(st.integers(-1, 1), st.integers(-1, 1)), min_size=9, max_size=9)


@settings(max_examples=100, deadline=None)
@given(ordered, st.integers(0, 2**31), st.sampled_from(["sterile", "remenik", "env"]))
def test_attractiveness(pairs, seed, variant):
    a = np.array([min(x, y) for x, y in pairs])
    b = np.array([max(x, y) for x, y in pairs])
    box = Box.cube(4, 1)
    s = build_stream(ModelParams(2.0, 1.0, 0.4), box, 4.0, seed)
    ts = np.linspace(0, 4, 9)
    _, rep = coupled_evolve([(variant, LatticeConfig(box, a)), (variant, LatticeConfig(box, b))], s, ts)
    assert all(rep[(0, 1)])


@pytest.mark.parametrize("dim,want", [(2, (2 / 3, 1 / 6, 1 / 6)), (1, (0.5, 0.25, 0.25))])
def test_comparison_chain_equilibrium(dim, want):
    est = comparison_chain(1.0, 1.0, 0.5, dim, 200_000.0, 3)
    for state, w in zip((1, 0, -1), want):
        assert abs(est[state].value - w) < 3 * est[state].stderr + 1e-12


def test_positive_correlation_3x3():
    box = Box.cube(1, 2)
    p = ModelParams(1.0, 1.0, 0.5, dim=2)
    f = [((0, 0), 1)]
    g = [((1, 0), 0), ((0, 1), 0)]
    cov, se = positive_correlation(p, box, [(0, 0), (1, 1)], f, g, 0.7, 20_000, 2)
    assert cov >= -3 * se


def test_variant_parsing():
    assert ModelVariant.parse("xi") is ModelVariant.STERILE
    assert ModelVariant.parse("Two-State-Env") is ModelVariant.ENV
    with pytest.raises(ValueError):
        ModelVariant.parse("kuoch")
