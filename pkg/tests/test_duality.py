import numpy as np
import pytest

from sterile_cp.duality import dual_evolve, duality_check, environment_reversal_check, pathwise_duality
from sterile_cp.events import ModelParams, build_stream
from sterile_cp.lattice import Box
from sterile_cp.process import sample_initial

BOX = Box.cube(3, 2)
P = ModelParams(1.0, 1.0, 1.0, dim=2)


def _env(seed, box=BOX, theta=1.0):
    return sample_initial("mu_rho", {"theta": theta}, box, seed)


def test_empty_dual():
    s = build_stream(P, BOX, 2.0, 1)
    assert dual_evolve(s, _env(1), [], 2.0).a_hat == frozenset()


def test_time_zero_dual():
    s = build_stream(P, BOX, 2.0, 1)
    env = _env(3)
    C = [(0, 0), (1, 0), (0, 1)]
    d = dual_evolve(s, env, C, 0.0)
    minus = set(env.sites_in(-1))
    assert d.a_hat == frozenset(c for c in C if c not in minus)


def test_no_arrows_dual_stays_in_c():
    p = ModelParams(0.0, 1.0, 1.0, dim=2)
    C = [(0, 0), (1, 1)]
    for seed in range(50):
        s = build_stream(p, BOX, 1.5, seed)
        assert dual_evolve(s, _env(seed), C, 1.5).a_hat <= frozenset(C)


def test_dual_past_horizon_rejected():
    s = build_stream(P, BOX, 1.0, 1)
    with pytest.raises(ValueError):
        dual_evolve(s, _env(1), [(0, 0)], 2.0)


@pytest.mark.parametrize("params", [ModelParams(1.0, 1.0, 1.0, dim=2), ModelParams(2.0, 0.5, 0.3, dim=2),
                                    ModelParams(0.6, 3.0, 2.0, dim=2)])
def test_pathwise_identity(params):
    A, C, D = [(0, 0)], [(0, 0)], [(1, 0)]
    for seed in range(200):
        s = build_stream(params, BOX, 1.0, seed)
        lhs, rhs = pathwise_duality(s, _env(seed, theta=params.theta), A, C, D, 1.0)
        assert lhs == rhs


def test_environment_reversal():
    for seed in range(20):
        s = build_stream(P, BOX, 3.0, seed)
        assert environment_reversal_check(s, _env(seed), 3.0, [0.0, 0.7, 1.9, 3.0])


def test_empty_d_exact_zero():
    lhs, rhs, z = duality_check([(0, 0)], [(0, 0)], [], 1.0, P, BOX, 100, 0)
    assert lhs.value == rhs.value == 0.0 and z == 0.0


def test_distributional_identity_small():
    lhs, rhs, z = duality_check([(0, 0)], [(0, 0)], [(1, 0)], 1.0, P, BOX, 20_000, 4)
    assert abs(z) < 4
    assert 0 < lhs.value < 1
