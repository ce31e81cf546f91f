"""One-dimensional contact-process measurements: edge speed and its tails,
finite-set survival, epsilon-good configurations and open paths in a moving tube."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _core
from .events import EventStream, ModelParams, build_stream
from .lattice import Box
from .parallel import run_replicas
from .process import InitSpec, survival_runs
from .rng import as_key
from .stats import EstimateCI, linfit


class BoxTooSmall(ValueError):
    pass


# ---------------------------------------------------------------------------
# right edge


@njit(cache=True, nogil=True)
def _edge_kernel(r0, r1, out, base, left, half, lam, lam_cap, half_line, sample_times):
    """Rightmost/leftmost 1 of the contact process on [-left, half].

    out[:, :m] r_t at the sample times (nan once extinct), out[:, m:2m] l_t,
    out[:, 2m] wall flag (r reached +half), out[:, 2m+1] extinction time (inf if alive).
    """
    n = left + half + 1
    m = sample_times.shape[0]
    t_end = sample_times[m - 1]
    e_src = np.empty(2 * (n - 1), np.int32)
    e_dst = np.empty(2 * (n - 1), np.int32)
    k = 0
    for i in range(n):
        if i > 0:
            e_src[k] = i
            e_dst[k] = i - 1
            k += 1
        if i < n - 1:
            e_src[k] = i
            e_dst[k] = i + 1
            k += 1
    rates = np.array([1.0, lam, 0.0, 0.0])
    caps = np.array([1.0, lam_cap, 0.0, 0.0])
    site_in = np.ones(n, np.bool_)
    dt = _core.chunk_length(n, e_src.shape[0], caps, t_end)
    for rr in range(r0, r1):
        key = _core.replica_key(base, rr)
        st = np.zeros(n, np.int8)
        if half_line:
            st[: left + 1] = 1
            lo = 0
        else:
            st[left] = 1
            lo = left
        hi = left
        alive = True
        wall = False
        t_ext = np.inf
        j = 0
        nxt, keep, cnt = _core.cursor_new(key, n, e_src.shape[0], rates, caps)
        t = 0.0
        while True:
            t_hi = min(t + dt, t_end)
            last = t_hi >= t_end
            et, ek, es, er = _core.cursor_fill(key, n, e_src, e_dst, rates, caps,
                                               nxt, keep, cnt, t, t_hi, last)
            for i in range(et.shape[0]):
                while j < m and et[i] > sample_times[j]:
                    out[rr - r0, j] = hi - left
                    out[rr - r0, m + j] = lo - left
                    j += 1
                x = es[i]
                old = _core.apply_event(st, _core.CONTACT, ek[i], x, er[i], site_in, 0)
                if old == 1 and st[x] == 0:
                    if x == hi or x == lo:
                        while hi >= 0 and st[hi] != 1:
                            hi -= 1
                        if hi < 0:
                            alive = False
                            t_ext = et[i]
                            break
                        while st[lo] != 1:
                            lo += 1
                elif old == 0 and st[x] == 1:
                    if x > hi:
                        hi = x
                        if hi == n - 1:
                            wall = True
                    if x < lo:
                        lo = x
            t = t_hi
            if last or not alive:
                break
        while j < m:
            if alive:
                out[rr - r0, j] = hi - left
                out[rr - r0, m + j] = lo - left
            else:
                out[rr - r0, j] = np.nan
                out[rr - r0, m + j] = np.nan
            j += 1
        out[rr - r0, 2 * m] = 1.0 if wall else 0.0
        out[rr - r0, 2 * m + 1] = t_ext


@dataclass
class EdgeTrace:
    """Edges of each replica at the sample times (nan once extinct)."""

    times: np.ndarray
    r: np.ndarray  # (reps, m)
    l: np.ndarray
    wall: np.ndarray  # bool per replica
    extinction: np.ndarray  # time, inf if alive at the last sample time

    @property
    def alive(self):
        return np.isinf(self.extinction)


def edge_traces(lam, sample_times, box_halfwidth, reps, seed, half_line=True, lam_cap=None,
                left_halfwidth=None, jobs=None) -> EdgeTrace:
    """Run the contact process on [-B', B] from 1's on [-B', 0] (or on {0}).

    B' defaults to B; a shorter left side only trims sites far behind the edge.
    """
    ts = np.asarray(sample_times, float)
    if lam < 0 or ts.size == 0 or np.any(np.diff(ts) < 0) or ts[0] < 0:
        raise ValueError("need lam >= 0 and nondecreasing nonnegative sample times")
    cap = lam if lam_cap is None else lam_cap
    if cap < lam:
        raise ValueError("lam_cap must be at least lam")
    m = ts.size
    out = np.zeros((reps, 2 * m + 2))
    left = int(box_halfwidth if left_halfwidth is None else left_halfwidth)
    run_replicas(_edge_kernel, reps, out,
                 (as_key(seed), left, int(box_halfwidth), float(lam), float(cap), bool(half_line), ts),
                 jobs)
    return EdgeTrace(ts, out[:, :m], out[:, m:2 * m], out[:, 2 * m] > 0, out[:, 2 * m + 1])


@dataclass
class EdgeSpeed:
    v: EstimateCI
    n_alive: int
    n_extinct: int
    n_wall: int


def edge_speed(lam, t_max, box_halfwidth, reps, seed, lam_cap=None, left_halfwidth=None,
               jobs=None) -> EdgeSpeed:
    """Mean of r_{t_max}/t_max over replicas that survive and never touch the right wall."""
    if lam <= 0 or t_max <= 0:
        raise ValueError("need lam > 0 and t_max > 0")
    tr = edge_traces(lam, [t_max], box_halfwidth, reps, seed, True, lam_cap, left_halfwidth, jobs)
    n_wall = int(tr.wall.sum())
    if n_wall > 0.01 * reps:
        raise BoxTooSmall(f"right wall reached in {n_wall}/{reps} replicas; enlarge box_halfwidth")
    keep = tr.alive & ~tr.wall
    n_ext = int((~tr.alive).sum())
    if keep.sum() < 2:
        raise ValueError(f"only {int(keep.sum())} of {reps} replicas survived to t_max; "
                         "the process is too subcritical for an edge speed")
    v = EstimateCI.mean(tr.r[keep, 0] / t_max, seed)
    return EdgeSpeed(v, int(keep.sum()), n_ext, n_wall)


@dataclass
class EdgeTail:
    t: np.ndarray
    p_low: list  # EstimateCI of P(r_t <= a t)
    p_high: list  # EstimateCI of P(r_t >= b t)
    gamma0: float  # minus the fitted slope of log P(r_t <= a t)
    gamma1: float
    r2_low: float
    r2_high: float
    v_hat: float


def edge_tail(lam, a, b, t_values, reps, seed, box_halfwidth=None, v_hat=None, jobs=None) -> EdgeTail:
    """Lower and upper large-deviation tails of the right edge along a ladder of times.

    Extinct replicas count as r_t = -inf.  Slopes are fitted over the times with
    a positive estimate (nan if fewer than two).
    """
    if a >= b:
        raise ValueError("need a < b")
    ts = np.sort(np.asarray(t_values, float))
    if box_halfwidth is None:
        box_halfwidth = int(math.ceil(max(b, 2 * lam + 1) * ts[-1])) + 10
    tr = edge_traces(lam, ts, box_halfwidth, reps, seed, True, None, None, jobs)
    r = np.where(np.isnan(tr.r), -np.inf, tr.r)
    if v_hat is None:
        ok = tr.alive
        v_hat = float(np.mean(r[ok, -1]) / ts[-1]) if ok.any() else float("nan")
    if not (a < v_hat < b):
        warnings.warn(f"a={a}, b={b} do not bracket the edge speed estimate {v_hat:.4g}")
    low = [EstimateCI.proportion(int(np.sum(r[:, k] <= a * t)), reps, seed) for k, t in enumerate(ts)]
    high = [EstimateCI.proportion(int(np.sum(r[:, k] >= b * t)), reps, seed) for k, t in enumerate(ts)]

    def fit(ests):
        p = np.array([e.value for e in ests])
        ok = p > 0
        if ok.sum() < 2:
            return float("nan"), float("nan")
        slope, _, _, r2 = linfit(ts[ok], np.log(p[ok]))
        return -slope, r2

    g0, r0 = fit(low)
    g1, r1 = fit(high)
    return EdgeTail(ts, low, high, g0, g1, r0, r1, v_hat)


# ---------------------------------------------------------------------------
# survival from finite sets and epsilon-good configurations


def finite_set_survival(lam, A, t_max, reps, seed, box_halfwidth=50, jobs=None) -> EstimateCI:
    """P(contact process from 1's on A is alive at t_max); box = A's hull plus a margin."""
    A = sorted({int(a[0]) if isinstance(a, (tuple, list)) else int(a) for a in A})
    if not A:
        return EstimateCI(0.0, 0.0, (0.0, 0.0), int(reps), int(seed))
    box = Box(1, (A[0] - box_halfwidth,), (A[-1] + box_halfwidth,))
    init = InitSpec("set", sites=tuple((a,) for a in A))
    res = survival_runs("contact", ModelParams(lam, 1.0, 0.0, 1), box, init, t_max, reps, seed, jobs)
    return EstimateCI.proportion(int(res[:, 0].sum()), reps, seed)


@dataclass
class EpsGood:
    survival: EstimateCI
    is_good: bool
    t_max: float
    horizon_factor: float


def truncate_config(config, epsilon, N):
    """Zero a configuration on [0, l] outside [ceil(eps N), l - ceil(eps N)]."""
    cfg = np.asarray(config, dtype=np.int8).copy()
    ell = cfg.size - 1
    m = math.ceil(epsilon * N)
    cfg[:m] = 0
    cfg[ell - m + 1:] = 0
    return cfg


def epsilon_good(config, epsilon, N, lam, reps, seed, t_max=None, horizon_factor=2.0,
                 lam_cap=None, jobs=None) -> EpsGood:
    """Survival of the truncated configuration on [0, l] up to t_max = c * l (c = horizon_factor)."""
    cfg = np.asarray(config)
    ell = cfg.size - 1
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if ell < 2 * N:
        raise ValueError("configuration length must be at least 2N")
    if np.any((cfg != 0) & (cfg != 1)):
        raise ValueError("configuration must be 0/1")
    if t_max is None:
        t_max = horizon_factor * ell
    cfg = truncate_config(cfg, epsilon, N)
    box = Box(1, (0,), (ell,))
    params = ModelParams(lam, 1.0, 0.0, 1, lam_cap=lam_cap)
    if not cfg.any():
        est = EstimateCI(0.0, 0.0, (0.0, 0.0), int(reps), int(seed))
    else:
        from .process import LatticeConfig
        init = InitSpec("fixed", config=LatticeConfig(box, cfg))
        res = survival_runs("contact", params, box, init, t_max, reps, seed, jobs)
        est = EstimateCI.proportion(int(res[:, 0].sum()), reps, seed)
    return EpsGood(est, bool(est.value >= 1 - epsilon), float(t_max), float(horizon_factor))


# ---------------------------------------------------------------------------
# open paths inside a moving tube


@dataclass(frozen=True)
class Tube:
    """Space-time region {(x, s): left(s) <= x <= right(s), 0 <= s <= t_end}.

    left(s) = a_l + b_l s and right(s) = a_r + b_r s with b_l, b_r >= 0.
    start/end are integer site intervals at times 0 and t_end.
    """

    a_l: float
    b_l: float
    a_r: float
    b_r: float
    t_end: float
    start: tuple
    end: tuple

    def __post_init__(self):
        if self.b_l < 0 or self.b_r < 0:
            raise ValueError("tube walls must be nondecreasing in time")
        if self.t_end <= 0:
            raise ValueError("tube needs positive duration")
        if self.start[1] < self.start[0] or self.end[1] < self.end[0]:
            raise ValueError("degenerate tube: empty start or end interval")

    def left(self, s):
        return self.a_l + self.b_l * s

    def right(self, s):
        return self.a_r + self.b_r * s

    def x_range(self):
        lo = min(math.floor(self.a_l), self.start[0], self.end[0])
        hi = max(math.ceil(self.right(self.t_end)), self.start[1], self.end[1])
        return lo, hi


@dataclass(frozen=True)
class Parallelogram:
    L: float
    delta: float
    v: float

    def __post_init__(self):
        if self.L <= 0 or self.v <= 0 or not 0 < self.delta < 1:
            raise ValueError("need L > 0, v > 0 and delta in (0, 1)")

    @property
    def t_L(self):
        return (1 + 3 * self.delta) * self.L / self.v

    @property
    def vertices(self):
        d, L = self.delta, self.L
        return {"u0": (-1.5 * d * L, 0.0), "v0": (-0.5 * d * L, 0.0),
                "u1": ((1 + 1.5 * d) * L, self.t_L), "v1": ((1 + 2.5 * d) * L, self.t_L)}

    @property
    def start_interval(self):
        return (-1.1 * self.delta * self.L, -0.9 * self.delta * self.L)

    @property
    def end_interval(self):
        return ((1 + 1.75 * self.delta) * self.L, (1 + 2.25 * self.delta) * self.L)

    def tube(self) -> Tube:
        """Start rounded outward (then clipped to the slice at time 0), end rounded inward."""
        vx = self.vertices
        u0, v0, u1 = vx["u0"][0], vx["v0"][0], vx["u1"][0]
        x0, y0 = self.start_interval
        x1, y1 = self.end_interval
        s_lo = max(math.floor(x0), math.ceil(u0))
        s_hi = min(math.ceil(y0), math.floor(v0))
        e_lo, e_hi = math.ceil(x1), math.floor(y1)
        if s_hi < s_lo or e_hi < e_lo:
            raise ValueError("degenerate parallelogram: an interval is empty after rounding")
        slope = (u1 - u0) / self.t_L
        return Tube(u0, slope, v0, slope, self.t_L, (s_lo, s_hi), (e_lo, e_hi))


@njit(cache=True)
def _tube_run(ev_t, ev_k, ev_s, ev_r, x_lo, n, a_l, b_l, a_r, b_r, s_lo, s_hi, e_lo, e_hi, t_end):
    """Constrained contact process inside the tube with genealogy.

    Returns (success, node_site, node_time, node_parent, leaf).
    """
    cap = 16 + (s_hi - s_lo + 1)
    for i in range(ev_k.shape[0]):
        if ev_k[i] == _core.ARROW:
            cap += 1
    node_site = np.empty(cap, np.int64)
    node_time = np.empty(cap)
    node_parent = np.empty(cap, np.int64)
    nn = 0
    node_at = np.full(n, -1, np.int64)
    for x in range(s_lo, s_hi + 1):
        if a_l <= x <= a_r:
            node_site[nn] = x
            node_time[nn] = 0.0
            node_parent[nn] = -1
            node_at[x - x_lo] = nn
            nn += 1
    kp = 0
    for i in range(ev_t.shape[0]):
        s = ev_t[i]
        if s > t_end:
            break
        L = a_l + b_l * s
        R = a_r + b_r * s
        while kp < n and kp + x_lo < L:
            node_at[kp] = -1
            kp += 1
        k = ev_k[i]
        y = ev_s[i]
        if k == _core.DEATH:
            node_at[y] = -1
        elif k == _core.ARROW:
            src = ev_r[i]
            if src >= 0 and node_at[src] >= 0 and node_at[y] < 0:
                xc = y + x_lo
                if L <= xc <= R:
                    node_site[nn] = xc
                    node_time[nn] = s
                    node_parent[nn] = node_at[src]
                    node_at[y] = nn
                    nn += 1
    L = a_l + b_l * t_end
    R = a_r + b_r * t_end
    leaf = -1
    for x in range(e_lo, e_hi + 1):
        j = x - x_lo
        if 0 <= j < n and node_at[j] >= 0 and L <= x <= R:
            leaf = node_at[j]
            break
    return leaf >= 0, node_site[:nn], node_time[:nn], node_parent[:nn], leaf


@njit(cache=True, nogil=True)
def _tube_kernel(r0, r1, out, base, lam, lam_cap, x_lo, n, a_l, b_l, a_r, b_r,
                 s_lo, s_hi, e_lo, e_hi, t_end):
    e_src = np.empty(2 * (n - 1), np.int32)
    e_dst = np.empty(2 * (n - 1), np.int32)
    k = 0
    for i in range(n):
        if i > 0:
            e_src[k] = i
            e_dst[k] = i - 1
            k += 1
        if i < n - 1:
            e_src[k] = i
            e_dst[k] = i + 1
            k += 1
    rates = np.array([1.0, lam, 0.0, 0.0])
    caps = np.array([1.0, lam_cap, 0.0, 0.0])
    for rr in range(r0, r1):
        key = _core.replica_key(base, rr)
        et, ek, es, er = _core.generate(key, n, e_src, e_dst, rates, caps, t_end)
        ok, _, _, _, _ = _tube_run(et, ek, es, er, x_lo, n, a_l, b_l, a_r, b_r,
                                   s_lo, s_hi, e_lo, e_hi, t_end)
        out[rr - r0] = 1.0 if ok else 0.0


def _tube_box(tube: Tube) -> Box:
    lo, hi = tube.x_range()
    return Box(1, (lo,), (hi,))


def tube_open_prob(lam, tube: Tube, reps, seed, lam_cap=None, jobs=None) -> EstimateCI:
    """P(some open path of the contact graphical representation stays in the tube
    from its start interval at time 0 to its end interval at t_end)."""
    box = _tube_box(tube)
    cap = lam if lam_cap is None else lam_cap
    out = np.zeros(reps)
    args = (as_key(seed), float(lam), float(cap), box.lo[0], box.n_sites,
            float(tube.a_l), float(tube.b_l), float(tube.a_r), float(tube.b_r),
            int(tube.start[0]), int(tube.start[1]), int(tube.end[0]), int(tube.end[1]),
            float(tube.t_end))
    run_replicas(_tube_kernel, reps, out, args, jobs)
    return EstimateCI.proportion(int(out.sum()), reps, seed)


def tube_stream(lam, tube: Tube, seed, r, lam_cap=None) -> EventStream:
    """The event stream replica r of ``tube_open_prob(..., seed)`` used."""
    from .rng import replica_key
    cap = lam if lam_cap is None else lam_cap
    params = ModelParams(lam, 1.0, 0.0, 1, lam_cap=cap)
    return build_stream(params, _tube_box(tube), tube.t_end, int(replica_key(seed, r)))


def tube_path(stream: EventStream, tube: Tube):
    """An open in-tube path on ``stream`` as [(x, entry_time), ...], or None."""
    box = stream.box
    ok, site, time, parent, leaf = _tube_run(
        stream.time, stream.kind, stream.site, stream.src, box.lo[0], box.n_sites,
        tube.a_l, tube.b_l, tube.a_r, tube.b_r, tube.start[0], tube.start[1],
        tube.end[0], tube.end[1], tube.t_end)
    if not ok:
        return None
    out = []
    j = leaf
    while j >= 0:
        out.append((int(site[j]), float(time[j])))
        j = parent[j]
    return out[::-1]


def audit_path(stream: EventStream, tube: Tube, path) -> bool:
    """Independent check that ``path`` is an open path inside the tube."""
    if not path:
        return False
    x0, t0 = path[0]
    if t0 != 0.0 or not (tube.start[0] <= x0 <= tube.start[1]):
        return False
    if not (tube.end[0] <= path[-1][0] <= tube.end[1]):
        return False
    for k, (x, ta) in enumerate(path):
        tb = path[k + 1][1] if k + 1 < len(path) else tube.t_end
        if tb < ta:
            return False
        deaths = stream.death_times((x,))
        if np.any((deaths > ta) & (deaths <= tb)):
            return False
        if not (tube.left(tb) <= x <= tube.right(ta)) or not (tube.left(ta) <= x <= tube.right(tb)):
            return False
        if k + 1 < len(path):
            y = path[k + 1][0]
            if abs(y - x) != 1 or not np.any(stream.arrow_times((x,), (y,)) == tb):
                return False
    return True


def parallelogram_open(lam, L, delta, v_input, reps, seed, lam_cap=None, jobs=None) -> EstimateCI:
    """P(open path from [x0, y0] x {0} to [x1, y1] x {t_L} inside the parallelogram)."""
    if v_input <= 0:
        raise ValueError("v_input must be positive")
    return tube_open_prob(lam, Parallelogram(L, delta, v_input).tube(), reps, seed, lam_cap, jobs)
