"""Dual of Remenik's process by replaying a stored stream backwards."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _core
from .events import EventStream, ModelParams, build_stream
from .lattice import Box
from .parallel import run_replicas
from .process import LatticeConfig
from .rng import as_key, split_key
from .stats import EstimateCI


@dataclass(frozen=True)
class DualState:
    """Dual configuration at dual time s (forward time t - s)."""

    t: float
    s: float
    a_hat: frozenset
    b_hat: frozenset
    b_hat0: frozenset  # dual -1's at dual time 0, i.e. the forward environment at t

    def __post_init__(self):
        if self.a_hat & self.b_hat:
            raise ValueError("dual 1's and dual -1's must be disjoint")


@njit(cache=True)
def _env_forward(env, ev_t, ev_k, ev_s, n_ev, prev):
    """Run the 0/-1 environment over the first n_ev events, storing pre-event values."""
    for i in range(n_ev):
        k = ev_k[i]
        if k == _core.ARRIVAL or k == _core.REMOVAL:
            x = ev_s[i]
            prev[i] = env[x]
            if k == _core.ARRIVAL:
                if env[x] == 0:
                    env[x] = -1
            elif env[x] == -1:
                env[x] = 0


@njit(cache=True)
def _dual_backward(env, ahat, ev_t, ev_k, ev_s, ev_r, n_ev, prev, snap_times, snaps):
    """Sweep events n_ev-1..0 backwards; env holds B_t on entry and B_0 on exit.

    snap_times (decreasing forward times) receive the environment at those times.
    """
    j = 0
    m = snap_times.shape[0]
    for i in range(n_ev - 1, -1, -1):
        while j < m and ev_t[i] <= snap_times[j]:
            snaps[j, :] = env
            j += 1
        k = ev_k[i]
        x = ev_s[i]
        if k == _core.ARRIVAL or k == _core.REMOVAL:
            env[x] = prev[i]
            if env[x] == -1:
                ahat[x] = False
        elif k == _core.DEATH:
            ahat[x] = False
        else:
            y = ev_r[i]
            if ahat[x] and y >= 0 and env[y] != -1:
                ahat[y] = True
    while j < m:
        snaps[j, :] = env
        j += 1


def _prepare(stream: EventStream, env_init: LatticeConfig, t: float):
    if env_init.box != stream.box:
        raise ValueError("environment and stream live on different boxes")
    if stream.box.boundary == "occupied":
        raise ValueError("the dual is defined for vacant or periodic boundaries")
    if not (0 <= t <= stream.horizon):
        raise ValueError("t must lie in [0, horizon]")
    if np.any(env_init.state == 1):
        raise ValueError("environment states must lie in {0, -1}")
    n_ev = int(np.searchsorted(stream.time, t, side="right"))
    env = env_init.state.copy()
    prev = np.zeros(n_ev, np.int8)
    _env_forward(env, stream.time, stream.kind, stream.site, n_ev, prev)
    return env, prev, n_ev


def _set(box, mask):
    return frozenset(box.site(i) for i in np.flatnonzero(mask))


def dual_evolve(stream: EventStream, env_init: LatticeConfig, C, t: float,
                snap_times=()) -> DualState:
    """Dual started from C at forward time t, run down to forward time 0."""
    box = stream.box
    env, prev, n_ev = _prepare(stream, env_init, t)
    b_t = env.copy()
    ahat = box.mask(C) & (env != -1)
    snap_times = np.sort(np.asarray(snap_times, float))[::-1].copy()
    snaps = np.zeros((snap_times.size, box.n_sites), np.int8)
    _dual_backward(env, ahat, stream.time, stream.kind, stream.site, stream.src, n_ev, prev,
                   snap_times, snaps)
    state = DualState(float(t), float(t), _set(box, ahat), _set(box, env == -1), _set(box, b_t == -1))
    if snap_times.size:
        return state, dict(zip(snap_times.tolist(), snaps))
    return state


def environment_reversal_check(stream: EventStream, env_init: LatticeConfig, t, times) -> bool:
    """Backward-reconstructed environment equals the forward one at each time."""
    from .process import evolve
    times = np.sort(np.asarray(times, float))
    fwd = evolve("env", env_init, stream, times)
    _, snaps = dual_evolve(stream, env_init, [], t, times)
    return all(np.array_equal(fwd.configs[k], snaps[float(s)]) for k, s in enumerate(times))


def pathwise_duality(stream: EventStream, env_init: LatticeConfig, A, C, D, t):
    """Both indicator events of the pathwise identity on one realization.

    forward: A_t meets C and B_t meets D, started from A (minus B_0) over env_init
    dual:    the dual from C at t reaches A at time 0, and B_t meets D
    """
    from .process import evolve
    box = stream.box
    st = env_init.state.copy()
    a_mask = box.mask(A)
    st[a_mask & (st != -1)] = 1
    tr = evolve("remenik", LatticeConfig(box, st), stream, [t])
    final = tr.configs[0]
    d_mask = box.mask(D)
    lhs = bool(np.any(final[box.mask(C)] == 1) and np.any(final[d_mask] == -1))
    dual = dual_evolve(stream, env_init, C, t)
    rhs = bool(any(a in dual.a_hat for a in map(tuple, A)) and any(tuple(d) in dual.b_hat0 for d in D))
    return lhs, rhs


@njit(cache=True, nogil=True)
def _duality_kernel(r0, r1, out, base, side, n, e_src, e_dst, rates, caps,
                    mask_a, mask_c, mask_d, rho, t_end):
    """side 0: 1{A_t meets C, B_t meets D} from nu_A; side 1: 1{A_t meets A, B_0 meets D} from nu_C."""
    site_in = np.ones(n, np.bool_)
    probs = np.array([rho, 0.0, 0.0])
    template = np.zeros(n, np.int8)
    start = mask_a if side == 0 else mask_c
    for r in range(r0, r1):
        key = _core.replica_key(base, r)
        st = _core.sample_init(key, n, _core.INIT_NU_C, probs, start, 0, template)
        b0 = False
        for i in range(n):
            if mask_d[i] and st[i] == -1:
                b0 = True
        et, ek, es, er = _core.generate(key, n, e_src, e_dst, rates, caps, t_end)
        for i in range(et.shape[0]):
            _core.apply_event(st, _core.REMENIK, ek[i], es[i], er[i], site_in, 0)
        hit_ones = False
        hit_minus = False
        target = mask_c if side == 0 else mask_a
        for i in range(n):
            if target[i] and st[i] == 1:
                hit_ones = True
            if mask_d[i] and st[i] == -1:
                hit_minus = True
        if side == 0:
            out[r - r0] = 1.0 if (hit_ones and hit_minus) else 0.0
        else:
            out[r - r0] = 1.0 if (hit_ones and b0) else 0.0


def duality_check(A, C, D, t, params: ModelParams, box: Box, reps, seed, jobs=None):
    """Monte Carlo estimates of both sides of the distributional identity.

    Returns (lhs, rhs, z) where z is the difference in combined standard errors.
    """
    if box.boundary == "occupied":
        raise ValueError("the dual is defined for vacant or periodic boundaries")
    if t <= 0 or reps <= 0:
        raise ValueError("need t > 0 and reps > 0")
    if not D:
        zero = EstimateCI(0.0, 0.0, (0.0, 0.0), int(reps), int(seed))
        return zero, zero, 0.0
    e_src, e_dst = box.edges
    rates, caps = params.rate_arrays()
    masks = (box.mask(A), box.mask(C), box.mask(D))
    res = []
    for side in (0, 1):
        out = np.zeros(reps)
        args = (as_key(split_key(seed, side)), side, box.n_sites, e_src, e_dst, rates, caps,
                *masks, params.rho, float(t))
        run_replicas(_duality_kernel, reps, out, args, jobs)
        res.append(EstimateCI.proportion(int(out.sum()), reps, seed))
    lhs, rhs = res
    se = math.hypot(lhs.stderr, rhs.stderr)
    if se == 0:
        z = 0.0 if lhs.value == rhs.value else math.inf
    else:
        z = (lhs.value - rhs.value) / se
    return lhs, rhs, z
