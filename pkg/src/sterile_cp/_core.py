"""Compiled kernels shared by the simulation modules.

Streams are enumerated in the fixed order deaths, arrows, arrivals, removals,
each by location.  Every stream is a Poisson process at a cap rate whose points
are kept when ``mark * cap < rate``; caps above the rate give monotone couplings
between runs at different rates under the same seed.
"""
import numpy as np
from numba import njit

from .rng import uniform_pair, derive_key, TAG_INIT, TAG_REPLICA

DEATH, ARROW, ARRIVAL, REMOVAL = 0, 1, 2, 3

STERILE, REMENIK, CONTACT, ENV = 0, 1, 2, 3

INIT_ALL_ONE = 0
INIT_SINGLE = 1
INIT_PRODUCT = 2
INIT_MU_RHO = 3
INIT_NU_C = 4
INIT_FIXED = 5
INIT_SET = 6
INIT_CHI = 7


@njit(cache=True)
def replica_key(base, r):
    return derive_key(base, TAG_REPLICA, r)


@njit(cache=True)
def _stream_id(s, n_sites, n_edges):
    if s < n_sites:
        return DEATH, s
    s -= n_sites
    if s < n_edges:
        return ARROW, s
    s -= n_edges
    if s < n_sites:
        return ARRIVAL, s
    return REMOVAL, s - n_sites


@njit(cache=True)
def cursor_new(key, n_sites, n_edges, rates, caps):
    """Per-stream state: next point time, keep flag and draw counter."""
    S = 3 * n_sites + n_edges
    nxt = np.empty(S)
    keep = np.zeros(S, np.bool_)
    cnt = np.zeros(S, np.int64)
    for s in range(S):
        kind, loc = _stream_id(s, n_sites, n_edges)
        cap = caps[kind]
        if cap <= 0.0:
            nxt[s] = np.inf
            continue
        u1, u2 = uniform_pair(key, kind, loc, 0)
        nxt[s] = -np.log1p(-u1) / cap
        keep[s] = u2 * cap < rates[kind]
        cnt[s] = 1
    return nxt, keep, cnt


@njit(cache=True)
def cursor_fill(key, n_sites, e_src, e_dst, rates, caps, nxt, keep, cnt, t_lo, t_hi, inclusive):
    """Emit every kept point with time < t_hi (<= if inclusive), time-sorted.

    Ties are resolved by stream order, i.e. death < arrow < arrival < removal,
    then by location.
    """
    n_edges = e_src.shape[0]
    S = nxt.shape[0]
    capacity = 1024
    tb = np.empty(capacity)
    ib = np.empty(capacity, np.int32)
    n = 0
    for s in range(S):
        kind, loc = _stream_id(s, n_sites, n_edges)
        t = nxt[s]
        if not (t < t_hi or (inclusive and t == t_hi)):
            continue
        cap = caps[kind]
        rate = rates[kind]
        c = cnt[s]
        kp = keep[s]
        while t < t_hi or (inclusive and t == t_hi):
            if kp:
                if n == capacity:
                    capacity *= 2
                    tb2 = np.empty(capacity)
                    ib2 = np.empty(capacity, np.int32)
                    tb2[:n] = tb[:n]
                    ib2[:n] = ib[:n]
                    tb, ib = tb2, ib2
                tb[n] = t
                ib[n] = s
                n += 1
            u1, u2 = uniform_pair(key, kind, loc, c)
            c += 1
            t = t - np.log1p(-u1) / cap
            kp = u2 * cap < rate
        nxt[s] = t
        cnt[s] = c
        keep[s] = kp
    order = stable_time_order(tb, n, t_lo, t_hi)
    ot = np.empty(n)
    ok = np.empty(n, np.int8)
    os_ = np.empty(n, np.int32)
    orr = np.empty(n, np.int32)
    for i in range(n):
        j = order[i]
        ot[i] = tb[j]
        kind, loc = _stream_id(ib[j], n_sites, n_edges)
        ok[i] = kind
        if kind == ARROW:
            os_[i] = e_dst[loc]
            orr[i] = e_src[loc]
        else:
            os_[i] = loc
            orr[i] = -1
    return ot, ok, os_, orr


@njit(cache=True)
def stable_time_order(t, n, t_lo, t_hi):
    """Stable argsort of t[:n] (values in [t_lo, t_hi]) by bucketing."""
    order = np.empty(n, np.int64)
    if n == 0:
        return order
    nb = n
    width = t_hi - t_lo
    if not width > 0.0:
        width = 1.0
    scale = nb / width
    bucket = np.empty(n, np.int64)
    start = np.zeros(nb + 1, np.int64)
    for i in range(n):
        b = int((t[i] - t_lo) * scale)
        if b >= nb:
            b = nb - 1
        elif b < 0:
            b = 0
        bucket[i] = b
        start[b + 1] += 1
    for b in range(nb):
        start[b + 1] += start[b]
    pos = start[:nb].copy()
    for i in range(n):
        b = bucket[i]
        order[pos[b]] = i
        pos[b] += 1
    for b in range(nb):
        lo = start[b]
        hi = start[b + 1]
        for a in range(lo + 1, hi):
            v = order[a]
            tv = t[v]
            c = a - 1
            while c >= lo and t[order[c]] > tv:
                order[c + 1] = order[c]
                c -= 1
            order[c + 1] = v
    return order


@njit(cache=True)
def generate(key, n_sites, e_src, e_dst, rates, caps, horizon):
    """Whole stream on [0, horizon]."""
    nxt, keep, cnt = cursor_new(key, n_sites, e_src.shape[0], rates, caps)
    return cursor_fill(key, n_sites, e_src, e_dst, rates, caps, nxt, keep, cnt, 0.0, horizon, True)


@njit(cache=True)
def chunk_length(n_sites, n_edges, caps, t_max):
    tot = n_sites * (caps[0] + caps[2] + caps[3]) + n_edges * caps[1]
    if tot <= 0.0:
        return t_max
    return max(t_max / 256.0, min(t_max, 20000.0 / tot))


@njit(cache=True)
def apply_event(state, variant, kind, site, src, site_in, outside_val):
    """Apply one event in place; return the previous value at ``site``."""
    old = state[site]
    if not site_in[site]:
        return old
    if kind == DEATH:
        if old == 1:
            state[site] = 0
    elif kind == ARROW:
        if old == 0 and variant != ENV:
            if src < 0:
                sv = 1
            elif not site_in[src]:
                sv = outside_val
            else:
                sv = state[src]
            if sv == 1:
                state[site] = 1
    elif kind == ARRIVAL:
        if variant == REMENIK:
            if old >= 0:
                state[site] = -1
        elif variant != CONTACT:
            if old == 0:
                state[site] = -1
    else:
        if old == -1 and variant != CONTACT:
            state[site] = 0
    return old


@njit(cache=True)
def sample_init(key, n, kind, probs, mask, origin, template):
    """Initial configuration of one replica.

    probs: (p_minus, p_zero, p_plus) for the product law; probs[0] is the
    -1 density for the two-state and nu_C laws.
    """
    st = np.zeros(n, np.int8)
    if kind == INIT_ALL_ONE:
        st[:] = 1
    elif kind == INIT_SINGLE:
        st[origin] = 1
    elif kind == INIT_FIXED:
        st[:] = template
    elif kind == INIT_SET:
        for i in range(n):
            if mask[i]:
                st[i] = 1
    elif kind == INIT_CHI:
        for i in range(n):
            st[i] = 1 if mask[i] else -1
    else:
        for i in range(n):
            u, _ = uniform_pair(key, TAG_INIT, i, 0)
            if kind == INIT_PRODUCT:
                if u < probs[0]:
                    st[i] = -1
                elif u < probs[0] + probs[1]:
                    st[i] = 0
                else:
                    st[i] = 1
            else:
                if u < probs[0]:
                    st[i] = -1
                elif kind == INIT_NU_C and mask[i]:
                    st[i] = 1
    return st


@njit(cache=True)
def count_ones(state):
    c = 0
    for i in range(state.shape[0]):
        if state[i] == 1:
            c += 1
    return c


@njit(cache=True)
def evolve_record(variant, state, ev_t, ev_k, ev_s, ev_r, i0, site_in, outside_val,
                  sample_times, out):
    """Replay events from index i0, writing the state at each sample time to out."""
    m = sample_times.shape[0]
    j = 0
    i = i0
    ne = ev_t.shape[0]
    while j < m:
        while i < ne and ev_t[i] <= sample_times[j]:
            apply_event(state, variant, ev_k[i], ev_s[i], ev_r[i], site_in, outside_val)
            i += 1
        out[j, :] = state
        j += 1
    return i
