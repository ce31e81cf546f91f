import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sterile_cp import _core
from sterile_cp.events import ModelParams, build_stream, events_in_window
from sterile_cp.lattice import Box
from sterile_cp.rng import as_key

BOX = Box.cube(2, 1)


def test_zero_rates_give_empty_streams():
    s = build_stream(ModelParams(0.0, 1.0, 0.5), BOX, 5.0, 1)
    assert s.counts()["arrow"] == 0
    s = build_stream(ModelParams(1.0, 1.0, 0.0), BOX, 5.0, 1)
    c = s.counts()
    assert c["arrival"] == 0 and c["removal"] == 0 and c["arrow"] > 0


def test_bad_horizon_rejected():
    with pytest.raises(ValueError):
        build_stream(ModelParams(1.0), BOX, 0.0, 1)
    with pytest.raises(ValueError):
        build_stream(ModelParams(1.0, dim=2), BOX, 1.0, 1)


def test_death_count_mean_one_site():
    box = Box.cube(0, 1)
    counts = np.array([len(build_stream(ModelParams(0.0), box, 10.0, s)) for s in range(10_000)])
    # Poisson(10): sd of the mean is 0.0316
    assert abs(counts.mean() - 10.0) < 0.1


def test_superposition_and_window_independence():
    box = Box(2, (0, 0), (1, 1))
    p = ModelParams(0.5, 2.0, 0.3, dim=2)
    n_edges = len(box.edges[0])
    rate = n_edges * p.lam + box.n_sites * (1 + p.alpha + p.removal_rate)
    H = 2.0
    tot, a, b = [], [], []
    for seed in range(10_000):
        s = build_stream(p, box, H, seed)
        tot.append(len(s))
        a.append(len(events_in_window(s, 0.0, 1.0)))
        b.append(len(events_in_window(s, 1.0, 2.0)))
    tot = np.array(tot)
    se = np.sqrt(rate * H / tot.size)
    assert abs(tot.mean() - rate * H) < 4 * se
    a, b = np.array(a, float), np.array(b, float)
    cov = np.mean((a - a.mean()) * (b - b.mean()))
    se_cov = np.std((a - a.mean()) * (b - b.mean())) / np.sqrt(a.size)
    assert abs(cov) < 4 * se_cov


def test_stream_order_and_determinism():
    p = ModelParams(1.3, 2.0, 0.4, dim=2)
    box = Box.cube(2, 2)
    s1 = build_stream(p, box, 4.0, 99)
    s2 = build_stream(p, box, 4.0, 99)
    for x, y in zip(s1.arrays(), s2.arrays()):
        assert x.tobytes() == y.tobytes()
    assert np.all(np.diff(s1.time) >= 0)
    assert s1.time[0] >= 0 and s1.time[-1] <= 4.0
    for x in box.sites():
        d = s1.death_times(x)
        assert np.all(np.diff(d) > 0)
    s3 = build_stream(p, box, 4.0, 100)
    assert len(s3) != len(s1) or not np.array_equal(s3.time, s1.time)


def test_window_queries():
    s = build_stream(ModelParams(1.0, 1.0, 0.5), BOX, 6.0, 3)
    assert len(events_in_window(s, 2.0, 2.0)) == 0
    full = events_in_window(s, 0.0, 6.0)
    assert len(full) == sum(s.counts().values()) == len(s)
    halves = np.concatenate([events_in_window(s, 0.0, 2.5), events_in_window(s, 2.5, 6.0)])
    assert halves.tobytes() == full.tobytes()
    with pytest.raises(ValueError):
        events_in_window(s, 1.0, 7.0)


def test_dump(tmp_path):
    s = build_stream(ModelParams(1.0, 1.0, 0.5), BOX, 1.0, 3)
    f = tmp_path / "ev.csv"
    s.dump(f)
    lines = f.read_text().splitlines()
    assert lines[0] == "time,type,location"
    assert len(lines) == len(s) + 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.1, 3.0), st.floats(0.0, 1.0), st.integers(2, 6))
def test_chunked_materialization_matches_full(seed, lam, alpha, n_chunks):
    box = Box.cube(3, 1)
    p = ModelParams(lam, 1.5, alpha)
    e_src, e_dst = box.edges
    rates, caps = p.rate_arrays()
    key = as_key(seed)
    H = 5.0
    full = _core.generate(key, box.n_sites, e_src, e_dst, rates, caps, H)
    nxt, keep, cnt = _core.cursor_new(key, box.n_sites, e_src.shape[0], rates, caps)
    parts = []
    cuts = np.linspace(0, H, n_chunks + 1)
    for i in range(n_chunks):
        parts.append(_core.cursor_fill(key, box.n_sites, e_src, e_dst, rates, caps, nxt, keep, cnt,
                                       cuts[i], cuts[i + 1], i == n_chunks - 1))
    for j in range(4):
        assert np.concatenate([q[j] for q in parts]).tobytes() == full[j].tobytes()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.1, 2.0), st.floats(0.0, 2.0))
def test_thinning_is_nested(seed, lam, extra):
    """Arrows at rate lam are a subset of arrows at rate lam + extra with the same cap."""
    box = Box.cube(2, 1)
    cap = lam + extra + 0.1
    lo = build_stream(ModelParams(lam, lam_cap=cap), box, 3.0, seed)
    hi = build_stream(ModelParams(lam + extra, lam_cap=cap), box, 3.0, seed)
    pick = lambda s: {(t, d, r) for t, k, d, r in zip(*s.arrays()) if k == 1}
    assert pick(lo) <= pick(hi)
