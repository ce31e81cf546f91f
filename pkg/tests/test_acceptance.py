"""Acceptance criteria 1-14.  Each test prints one PASS/FAIL line (also repeated
in the terminal summary) and then asserts the same condition."""
import json
import math
import time

import numpy as np
import pytest
from scipy import stats as sps

from sterile_cp import cli
from sterile_cp.duality import duality_check, pathwise_duality
from sterile_cp.cptoolkit import edge_speed
from sterile_cp.estimators import (critical_bisect, erlang_tail, gap_threshold, kill_per_try,
                                   kill_rate_q, survival_prob)
from sterile_cp.events import ModelParams, build_stream
from sterile_cp.lattice import Box
from sterile_cp.parallel import set_default_jobs
from sterile_cp.percolation import cluster_stats, four_crossings_prob, threshold_bisect
from sterile_cp.process import (InitSpec, LatticeConfig, comparison_chain, coupled_evolve,
                                sample_initial)
from sterile_cp.renorm import BlockSpec, block_indicators, dead_zone_run
from sterile_cp.stats import EstimateCI

# tabulated d = 1 good-block scales (criteria 9 and 10)
K9, T0_9, BETA9 = 20, 2.0, 0.5


def test_c01_coupling_sandwich(report):
    t = time.perf_counter()
    p = ModelParams(2.0, 1.0, 0.5, dim=2)
    box = Box.cube(5, 2)
    init = LatticeConfig(box, np.ones(box.n_sites))
    ts = np.linspace(0.5, 20.0, 40)
    bad = 0
    for seed in range(1000):
        s = build_stream(p, box, 20.0, seed)
        _, rep = coupled_evolve([("remenik", init), ("sterile", init), ("contact", init)], s, ts)
        bad += sum(not ok for v in rep.values() for ok in v)
    dt = time.perf_counter() - t
    ok = report(1, bad == 0 and dt < 120, f"eta<=xi<=zeta violations={bad} over 1000 seeds x 40 times, {dt:.0f}s")
    assert ok


def test_c02_attractiveness(report):
    p = ModelParams(2.0, 1.0, 0.5, dim=2)
    box = Box.cube(5, 2)
    ts = np.linspace(0.5, 20.0, 40)
    bad = 0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        a, b = rng.integers(-1, 2, (2, box.n_sites))
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        s = build_stream(p, box, 20.0, seed)
        _, rep = coupled_evolve([("sterile", LatticeConfig(box, lo)), ("sterile", LatticeConfig(box, hi))],
                                s, ts)
        bad += sum(not ok for ok in rep[(0, 1)])
    ok = report(2, bad == 0, f"order violations={bad} over 1000 coupled pairs")
    assert ok


def test_c03_pathwise_duality(report):
    box = Box.cube(3, 2)
    triples = [(1.0, 1.0, 1.0), (2.0, 0.5, 0.3), (0.6, 3.0, 2.0)]
    A, C, D = [(0, 0)], [(0, 0)], [(1, 0)]
    fails = 0
    hits = 0
    for lam, theta, alpha in triples:
        p = ModelParams(lam, theta, alpha, dim=2)
        for seed in range(500):
            s = build_stream(p, box, 1.0, seed)
            env = sample_initial("mu_rho", {"theta": theta}, box, seed)
            lhs, rhs = pathwise_duality(s, env, A, C, D, 1.0)
            fails += lhs != rhs
            hits += lhs
    ok = report(3, fails == 0 and hits > 0, f"indicator mismatches={fails} over 1500 streams (events seen: {hits})")
    assert ok


def test_c04_distributional_duality(report):
    box = Box.cube(2, 2)
    p = ModelParams(1.0, 1.0, 1.0, dim=2)
    As = [[(0, 0)], [(0, 0), (1, 0)], [(-1, 0), (1, 0)]]
    CDs = [([(0, 0)], [(1, 0)]), ([(0, 1)], [(0, 0)]), ([(0, 0), (1, 0)], [(1, 0), (0, 1)])]
    zs = []
    seed = 0
    for A in As:
        for C, D in CDs:
            for t in (0.5, 1.0):
                seed += 1
                _, _, z = duality_check(A, C, D, t, p, box, 100_000, seed)
                zs.append(z)
    zmax = max(abs(z) for z in zs)
    ok = report(4, zmax < 4, f"max |z|={zmax:.2f} over 18 (A,C,D,t) choices at 1e5 reps each")
    assert ok


def test_c05_equilibrium_densities(report):
    lines = []
    ok = True
    for dim, want in ((2, (2 / 3, 1 / 6, 1 / 6)), (1, (0.5, 0.25, 0.25))):
        est = comparison_chain(1.0, 1.0, 1.0, dim, 1e6, 5)
        for s, w in zip((1, 0, -1), want):
            z = (est[s].value - w) / est[s].stderr
            ok &= abs(z) < 3
            lines.append(f"d={dim} pi({s:+d})={est[s].value:.4f} z={z:+.2f}")
    ok = report(5, ok, "; ".join(lines))
    assert ok


def test_c06_sykes_essam(report):
    t = time.perf_counter()
    pz = threshold_bisect("Z", 64, 0.5, 0.002, 2000, 6)
    ps = threshold_bisect("L*", 64, 0.5, 0.002, 2000, 6)
    total = pz.value + ps.value
    dt = time.perf_counter() - t
    ok = report(6, abs(total - 1) <= 0.02 and dt < 600,
                f"p_hat={pz.value:.4f} p_hat*={ps.value:.4f} sum={total:.4f}, {dt:.0f}s")
    assert ok


def test_c07_cluster_tails(report):
    a = cluster_stats(0.3, Box.cube(30, 2), "Z", 100_000, 7)
    b = cluster_stats(0.25, Box.cube(30, 2), "L*", 100_000, 7)
    ok = a.slope < 0 and b.slope < 0 and a.r2 > 0.95 and b.r2 > 0.95
    ok = report(7, ok, f"Z p=0.3 slope={a.slope:.3f} R2={a.r2:.4f}; L* p=0.25 slope={b.slope:.3f} R2={b.r2:.4f}")
    assert ok


def test_c08_four_crossings(report):
    hi = four_crossings_prob(0.7, 99, 0.5, 1000, 8)
    lo = four_crossings_prob(0.5, 99, 0.5, 1000, 8)
    ok = hi.ci95[0] > 0.9 and lo.ci95[1] < 0.1
    ok = report(8, ok, f"p=0.7: {hi.value:.3f} CI [{hi.ci95[0]:.3f}, {hi.ci95[1]:.3f}] (need > 0.9); "
                       f"p=0.5: {lo.value:.3f} CI [{lo.ci95[0]:.3f}, {lo.ci95[1]:.3f}] (need < 0.1)")
    assert ok


def test_c09_good_block(report):
    t = time.perf_counter()
    caps = dict(alpha_cap=0.1, removal_cap=0.1)
    small = BlockSpec.extinction(K9, T0_9, BETA9, ModelParams(2.0, 1.0, 0.01, **caps))
    large = BlockSpec.extinction(K9, T0_9, BETA9, ModelParams(2.0, 1.0, 0.1, **caps))
    a = block_indicators(small, 500, 9)
    b = block_indicators(large, 500, 9)
    ea = EstimateCI.proportion(int(a.sum()), 500, 9)
    eb = EstimateCI.proportion(int(b.sum()), 500, 9)
    dt = time.perf_counter() - t
    ok = ea.ci95[0] >= 0.9 and eb.value < ea.value and dt < 1800
    ok = report(9, ok, f"(K,t0,beta)=({K9},{T0_9},{BETA9}): alpha=0.01 P={ea.value:.3f} "
                       f"CI_lo={ea.ci95[0]:.3f}; alpha=0.1 P={eb.value:.3f}; {dt:.0f}s")
    assert ok


def test_c10_dead_zone(report):
    m = ModelParams(2.0, 1.0, 0.01)
    total, cells, opened = 0, 0, 0
    for seed in range(100):
        audit = dead_zone_run(K9, T0_9, BETA9, m, 4, seed)
        total += audit.violations
        cells += audit.dead_cells
        opened += sum(audit.open_blocks.values())
    ok = report(10, total == 0 and cells > 0,
                f"violations={total} over 100 seeds (dead cells={cells}, open blocks={opened})")
    assert ok


def test_c11_closed_forms(report):
    M = gap_threshold(0.25, 10)
    q1 = kill_rate_q(1.0)
    kt = kill_per_try(1.0, 2, 1)
    er = erlang_tail(3, 1.0, 1.0).prob
    # independent oracles: plain algebra and scipy's gamma law
    checks = [
        abs(M - 20.83) <= 0.01 and M == pytest.approx(-math.log(400) / math.log(0.75)),
        abs(q1 - 0.011578) <= 1e-6 and q1 == pytest.approx((1 - math.exp(-1)) * math.exp(-4)),
        abs(kt - 0.0073185) <= 1e-7 and kt == pytest.approx(((1 - math.exp(-1)) * math.exp(-2)) ** 2),
        abs(er - 0.080301) <= 1e-6 and er == pytest.approx(sps.gamma.cdf(1.0, 3), rel=1e-12),
    ]
    ok = report(11, all(checks), f"M={M:.4f} q1={q1:.7f} kill={kt:.8f} erlang={er:.7f}")
    assert ok


def _ci_violations(ests, increasing):
    """Pairs i < j whose CIs are strictly ordered against the expected direction."""
    bad = 0
    for i in range(len(ests)):
        for j in range(i + 1, len(ests)):
            a, b = ests[i], ests[j]
            if increasing and b.ci95[1] < a.ci95[0]:
                bad += 1
            if not increasing and b.ci95[0] > a.ci95[1]:
                bad += 1
    return bad


def test_c12_monotone_phase_structure(report):
    box = Box.cube(50, 1)
    init = InitSpec("single-one-at-origin")
    lams = [1.2, 1.5, 1.8, 2.1, 2.4]
    s_lam = [survival_prob("sterile", ModelParams(l, 1.0, 0.05, lam_cap=2.4), box, init, 50.0, 1000, 12)
             for l in lams]
    alphas = [0.0, 0.05, 0.1, 0.2, 0.4]
    caps = dict(alpha_cap=0.4, removal_cap=0.4)
    s_alpha = [survival_prob("sterile", ModelParams(2.4, 1.0, a, **caps), box, init, 50.0, 1000, 12)
               for a in alphas]
    con = critical_bisect(0.0, 1.0, box, 50.0, 0.3, 0.05, 500, 12, lo=0.5, hi=6.0, variant="contact")
    brackets = [critical_bisect(a, 1.0, box, 50.0, 0.3, 0.05, 500, 12, lo=0.5, hi=6.0)
                for a in (0.02, 0.05, 0.1, 0.2, 0.4)]
    v_lam = _ci_violations(s_lam, True)
    v_alpha = _ci_violations(s_alpha, False)
    v_con = sum(b.hi < con.lo for b in brackets)
    v_br = sum(brackets[j].hi < brackets[i].lo for i in range(5) for j in range(i + 1, 5))
    mono = all(b.monotone_ok for b in brackets + [con])
    ok = v_lam == 0 and v_alpha == 0 and v_con == 0 and v_br == 0 and mono
    ok = report(12, ok, f"lambda ladder {[round(e.value, 3) for e in s_lam]} viol={v_lam}; "
                        f"alpha ladder {[round(e.value, 3) for e in s_alpha]} viol={v_alpha}; "
                        f"lambda_con in [{con.lo:.3f},{con.hi:.3f}], lambda_c brackets "
                        f"{[(round(b.lo, 3), round(b.hi, 3)) for b in brackets]} viol={v_con + v_br}")
    assert ok


def test_c13_edge_speed(report):
    fast = edge_speed(2.0, 200.0, 260, 500, 13).v
    slow = edge_speed(1.8, 200.0, 260, 500, 13).v
    ok = slow.ci95[0] > 0 and fast.ci95[0] > slow.ci95[1]
    ok = report(13, ok, f"v(2.0)={fast.value:.4f} [{fast.ci95[0]:.4f},{fast.ci95[1]:.4f}]  "
                        f"v(1.8)={slow.value:.4f} [{slow.ci95[0]:.4f},{slow.ci95[1]:.4f}]")
    assert ok


def test_c14_determinism_across_workers(report, tmp_path):
    def library(jobs):
        box = Box.cube(15, 1)
        out = [
            survival_prob("sterile", ModelParams(2.0, 1.0, 0.1), box, InitSpec("mu_rho", theta=1.0),
                          10.0, 300, 14, jobs),
            four_crossings_prob(0.65, 20, 0.5, 300, 14, jobs),
            cluster_stats(0.4, Box.cube(15, 2), "Z", 300, 14, jobs=jobs).chi,
            block_indicators(BlockSpec.extinction(5, 0.5, 0.1, ModelParams(2.0, 1.0, 0.1)), 300, 14,
                             jobs=jobs).tobytes().hex(),
            duality_check([(0, 0)], [(0, 0)], [(1, 0)], 1.0, ModelParams(1.0, 1.0, 1.0, dim=2),
                          Box.cube(2, 2), 300, 14, jobs)[:2],
        ]
        return repr(out).encode()

    def command(jobs):
        out = tmp_path / f"j{jobs}"
        assert cli.main(["survival", "--seed", "14", "--reps", "300", "--jobs", str(jobs),
                         "--out", str(out)]) == 0
        res = json.loads((out / "result.json").read_text())
        return json.dumps(res["estimates"]).encode()

    libs = {j: library(j) for j in (1, 4, 8)}
    try:
        cmds = {j: command(j) for j in (1, 4, 8)}
    finally:
        set_default_jobs(1)  # the CLI sets the process-wide default
    ok = len(set(libs.values())) == 1 and len(set(cmds.values())) == 1
    ok = report(14, ok, "estimates byte-identical at 1, 4 and 8 workers" if ok else
                "estimates differ across worker counts")
    assert ok
