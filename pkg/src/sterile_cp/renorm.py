"""Block-construction estimators: good blocks, open sites, wet sets and the dead zone."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _core
from .events import EventStream, ModelParams
from .lattice import Box, make_rectangles
from .parallel import run_replicas
from .percolation import _crossing, _rect_offsets
from .process import InitSpec, LatticeConfig
from .rng import TAG_OP, as_key, uniform_pair
from .stats import EstimateCI

BLOCK_KINDS = ("d1-extinction", "d2-extinction", "ne-open", "generic-1d")
PC_SITE = 0.592746  # site percolation threshold on Z^2


@dataclass(frozen=True)
class BlockSpec:
    """Scales of one block construction.

    d1/d2: K spatial scale, T = (t0 + beta)/alpha.  ne-open: (N, eta), T = eps0/alpha.
    generic-1d: L spatial scale, T time scale, H = at least h_min ones.
    """

    kind: str
    params: ModelParams
    T: float
    K: int | None = None
    N: int | None = None
    eta: float | None = None
    t0: float | None = None
    beta: float | None = None
    eps0: float | None = None
    eps: float | None = None
    h_min: int | None = None

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        a = self.params.alpha
        if not (self.T > 0 and (math.isfinite(self.T) or a == 0)):
            raise ValueError("T must be positive (and finite unless alpha = 0)")
        if self.kind in ("d1-extinction", "d2-extinction"):
            if self.K is None or self.K < 1 or self.t0 is None or self.beta is None:
                raise ValueError("extinction blocks need K >= 1, t0 and beta")
            if not math.isclose(self.T, (self.t0 + self.beta) / a, rel_tol=1e-12):
                raise ValueError("T must equal (t0 + beta)/alpha")
        elif self.kind == "ne-open":
            if self.N is None or self.eta is None or self.eps0 is None:
                raise ValueError("ne-open blocks need N, eta and eps0")
            if not math.isclose(self.T, self.eps0 / a if a > 0 else math.inf, rel_tol=1e-12):
                raise ValueError("T must equal eps0/alpha")
        elif self.K is None or self.K < 1:
            raise ValueError("generic blocks need a spatial scale K (the L of the block)")

    @classmethod
    def extinction(cls, K, t0, beta, params: ModelParams):
        if params.alpha <= 0:
            raise ValueError("extinction blocks need alpha > 0")
        kind = "d1-extinction" if params.dim == 1 else "d2-extinction"
        return cls(kind, params, (t0 + beta) / params.alpha, K=int(K), t0=t0, beta=beta)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "params" and v is not None}
        d["params"] = {k: v for k, v in self.params.__dict__.items() if v is not None}
        return d


@dataclass
class WetSet:
    """Wet sites at one level of the renormalized lattice (1d: also min/max)."""

    level: int
    sites: np.ndarray
    left: int | None = None
    right: int | None = None

    def __post_init__(self):
        if self.sites.size and self.sites.ndim == 1:
            self.left = int(self.sites.min())
            self.right = int(self.sites.max())

    @property
    def empty(self) -> bool:
        return self.sites.shape[0] == 0


# ---------------------------------------------------------------------------
# extinction blocks


@njit(cache=True, nogil=True)
def _block_run(key, n, e_src, e_dst, rates, caps, inner, T, can_stop):
    """All-1 start; True iff no 1 in ``inner`` at any time of [T, 3T]."""
    st = np.ones(n, np.int8)
    site_in = np.ones(n, np.bool_)
    ones = n
    in_ones = 0
    for i in range(n):
        if inner[i]:
            in_ones += 1
    t_end = 3.0 * T
    dt = _core.chunk_length(n, e_src.shape[0], caps, t_end)
    nxt, keep, cnt = _core.cursor_new(key, n, e_src.shape[0], rates, caps)
    t = 0.0
    checked = False
    while True:
        t_hi = min(t + dt, t_end)
        last = t_hi >= t_end
        et, ek, es, er = _core.cursor_fill(key, n, e_src, e_dst, rates, caps,
                                           nxt, keep, cnt, t, t_hi, last)
        for i in range(et.shape[0]):
            if not checked and et[i] > T:
                if in_ones > 0:
                    return False
                checked = True
            s = es[i]
            old = _core.apply_event(st, _core.STERILE, ek[i], s, er[i], site_in, 0)
            new = st[s]
            if old == 1 and new != 1:
                ones -= 1
                if inner[s]:
                    in_ones -= 1
            elif new == 1 and old != 1:
                ones += 1
                if inner[s]:
                    in_ones += 1
                    if checked:
                        return False
            if ones == 0 and can_stop:
                return True
        t = t_hi
        if last:
            break
    return in_ones == 0 if not checked else True


@njit(cache=True, nogil=True)
def _block_kernel(r0, r1, out, base, n, e_src, e_dst, rates, caps, inner, T, can_stop):
    for r in range(r0, r1):
        key = _core.replica_key(base, r)
        out[r - r0] = 1.0 if _block_run(key, n, e_src, e_dst, rates, caps, inner, T, can_stop) else 0.0


def _block_box(K, dim, boundary):
    if boundary not in ("vacant", "occupied"):
        raise ValueError("block boundary must be 'vacant' or 'occupied'")
    box = Box.cube(2 * K, dim, boundary)
    inner = np.all(np.abs(box.coords) <= K, axis=1)
    return box, inner


def _block_prob(spec: BlockSpec, reps, seed, boundary, horizon, jobs):
    if reps <= 0:
        raise ValueError("reps must be positive")
    if horizon is not None and horizon < 3 * spec.T:
        raise ValueError(f"horizon {horizon} is shorter than 3T = {3 * spec.T}")
    box, inner = _block_box(spec.K, spec.params.dim, boundary)
    e_src, e_dst = box.edges
    rates, caps = spec.params.rate_arrays()
    out = np.zeros(reps)
    args = (as_key(seed), box.n_sites, e_src, e_dst, rates, caps, inner, float(spec.T),
            boundary == "vacant")
    run_replicas(_block_kernel, reps, out, args, jobs)
    return EstimateCI.proportion(int(out.sum()), reps, seed), out


def block_good_d1(K, t0, beta, model: ModelParams, reps, seed, boundary="vacant",
                  horizon=None, jobs=None) -> EstimateCI:
    """P(no 1 in [-K,K] during [T,3T]) from all 1's on [-2K,2K], T = (t0+beta)/alpha.

    boundary="occupied" freezes the outside at 1, which dominates any placement
    of the block inside a larger system.
    """
    if model.dim != 1:
        raise ValueError("block_good_d1 needs a one-dimensional model")
    spec = BlockSpec.extinction(K, t0, beta, model)
    return _block_prob(spec, reps, seed, boundary, horizon, jobs)[0]


def block_indicators(spec: BlockSpec, reps, seed, boundary="vacant", jobs=None):
    """Per-replica good indicators (for coupled comparisons)."""
    return _block_prob(spec, reps, seed, boundary, None, jobs)[1].astype(bool)


def c0_constant() -> float:
    from .estimators import c0
    return c0()


def block_good_d2(K, c_T, c_K, model: ModelParams, reps, seed, boundary="vacant",
                  horizon=None, jobs=None) -> EstimateCI:
    """Two-dimensional good block: T = c_T/alpha and, when K is None, K = ceil(T/c_K).

    The ratio T/K actually used must satisfy 2 T/K <= c0/lambda.
    """
    if model.dim != 2:
        raise ValueError("block_good_d2 needs a two-dimensional model")
    if model.alpha <= 0 or c_T <= 0 or c_K <= 0:
        raise ValueError("need alpha, c_T and c_K positive")
    T = c_T / model.alpha
    if K is None:
        K = max(1, math.ceil(T / c_K - 1e-9))
    ratio = T / K
    if model.lam > 0 and 2 * max(ratio, c_K) > c0_constant() / model.lam:
        raise ValueError(f"2*T/K = {2 * max(ratio, c_K):g} exceeds c0/lambda = "
                         f"{c0_constant() / model.lam:g}")
    spec = BlockSpec.extinction(K, c_T, 0.0, model)
    return _block_prob(spec, reps, seed, boundary, horizon, jobs)[0]


# ---------------------------------------------------------------------------
# open sites of the NE lattice


@dataclass
class OpenEstimate:
    """P(open) with any precondition warnings attached."""

    estimate: EstimateCI
    spec: BlockSpec
    warnings: tuple = ()


@njit(cache=True, nogil=True)
def _ne_kernel(r0, r1, out, base, n, e_src, e_dst, rates, caps,
               ik, iprobs, imask, iorigin, itemplate, t_end, side, rects):
    site_in = np.ones(n, np.bool_)
    for r in range(r0, r1):
        key = _core.replica_key(base, r)
        st = _core.sample_init(key, n, ik, iprobs, imask, iorigin, itemplate)
        ever = st == -1
        et, ek, es, er = _core.generate(key, n, e_src, e_dst, rates, caps, t_end)
        for i in range(et.shape[0]):
            _core.apply_event(st, _core.STERILE, ek[i], es[i], er[i], site_in, 0)
            if st[es[i]] == -1:
                ever[es[i]] = True
        op = (~ever).reshape((side, side))
        ok = True
        for q in range(4):
            if not _crossing(op, rects[q, 0], rects[q, 1], rects[q, 2], rects[q, 3],
                             False, q % 2 == 0):
                ok = False
                break
        out[r - r0] = 1.0 if ok else 0.0


def ne_initial(p0, seed_prob=0.0) -> InitSpec:
    """Product law: -1 w.p. 1-p0, else 1 w.p. seed_prob and 0 otherwise."""
    if not (0 <= p0 <= 1 and 0 <= seed_prob <= 1):
        raise ValueError("p0 and seed_prob must lie in [0, 1]")
    return InitSpec("product", probs=(1 - p0, p0 * (1 - seed_prob), p0 * seed_prob))


def ne_site_open(N, eta, eps0, model: ModelParams, init, reps, seed, jobs=None) -> OpenEstimate:
    """P(all four Q crossings by sites never -1 during [0, 2T]), T = eps0/alpha.

    ``init`` is an InitSpec (redrawn per replica) or a fixed LatticeConfig on [-N, N]^2.
    """
    if model.dim != 2:
        raise ValueError("NE-lattice sites need a two-dimensional model")
    if eps0 <= 0:
        raise ValueError("need eps0 > 0")
    # with alpha = 0 no -1 is ever created, so only the initial -1's close sites
    T = eps0 / model.alpha if model.alpha > 0 else math.inf
    spec = BlockSpec("ne-open", model, T, N=int(N), eta=float(eta), eps0=float(eps0))
    box = Box.cube(int(N), 2)
    if isinstance(init, LatticeConfig):
        init = InitSpec("fixed", config=init)
    ik, probs, mask, origin, template = init.compile(box)
    if init.kind == "product":
        p0 = 1.0 - init.probs[0]
    elif init.kind == "fixed":
        p0 = float(np.mean(init.config.state != -1))
    elif init.kind in ("mu_rho", "nu_C", "chi"):
        p0 = init.theta / (1 + init.theta) if init.theta else float("nan")
    else:
        p0 = 1.0
    notes = []
    if not model.theta / (1 + model.theta) > PC_SITE:
        notes.append(f"theta/(1+theta) = {model.theta / (1 + model.theta):.4f} is not above "
                     f"the site threshold {PC_SITE}")
    if not p0 - PC_SITE > 1 - math.exp(-2 * eps0):
        notes.append(f"margin p0 - p_c = {p0 - PC_SITE:.4f} does not exceed "
                     f"1 - exp(-2 eps0) = {1 - math.exp(-2 * eps0):.4f}")
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    rects = np.array([_rect_offsets(box, q) for q in make_rectangles(int(N), eta)], dtype=np.int64)
    e_src, e_dst = box.edges
    rates, caps = model.rate_arrays()
    out = np.zeros(reps)
    args = (as_key(seed), box.n_sites, e_src, e_dst, rates, caps, ik, probs, mask, origin,
            template, 2.0 * T if model.alpha > 0 else 0.0, 2 * int(N) + 1, rects)
    run_replicas(_ne_kernel, reps, out, args, jobs)
    return OpenEstimate(EstimateCI.proportion(int(out.sum()), reps, seed), spec, tuple(notes))


# ---------------------------------------------------------------------------
# oriented percolation


LATTICES = ("1d-diagonal", "ne-3d")


@njit(cache=True)
def _op_open(key, p, loc, level):
    u, _ = uniform_pair(key, TAG_OP, loc, level)
    return u < p


@njit(cache=True, nogil=True)
def _op1d_run(key, p, n_levels, ell, r):
    """Wet recursion from W_0 = {0} on {(m, n): m + n even}; m is stored at offset.

    ell[k], r[k] are the extreme wet sites at level k (r < ell when empty).
    Returns the first empty level, or n_levels + 1 if none.
    """
    off = 2 * n_levels + 1
    w = np.zeros(2 * off + 1, np.bool_)
    w[off] = True
    ell[0] = 0
    r[0] = 0
    nw = np.zeros_like(w)
    for k in range(n_levels):
        nw[:] = False
        lo = 1 << 30
        hi = -(1 << 30)
        for i in range(off - k, off + k + 1):
            if w[i] and _op_open(key, p, i, k):
                for j in (i - 1, i + 1):
                    nw[j] = True
                    m = j - off
                    lo = min(lo, m)
                    hi = max(hi, m)
        w[:] = nw
        ell[k + 1] = lo
        r[k + 1] = hi
        if lo > hi:
            ell[k + 2:] = lo
            r[k + 2:] = hi
            return k + 1
    return n_levels + 1


@njit(cache=True, nogil=True)
def _op1d_kernel(r0, r1, out, base, p, n_levels):
    ell = np.zeros(n_levels + 1, np.int64)
    rr = np.zeros(n_levels + 1, np.int64)
    for r in range(r0, r1):
        key = _core.replica_key(base, r)
        dead = _op1d_run(key, p, n_levels, ell, rr)
        out[r - r0, 0] = 1.0 if dead > n_levels else 0.0
        out[r - r0, 1] = rr[n_levels] / n_levels if dead > n_levels else np.nan
        out[r - r0, 2] = -ell[n_levels] / n_levels if dead > n_levels else np.nan


@dataclass
class OPResult:
    """Wet sets per level from W_0 = {0}; ``bar`` holds the all-wet run when requested."""

    lattice: str
    levels: list
    bar: list | None = None

    @property
    def survived(self) -> bool:
        return not self.levels[-1].empty

    @property
    def extinction_level(self) -> int | None:
        for w in self.levels:
            if w.empty:
                return w.level
        return None

    @property
    def v_hat(self) -> float:
        """r_n / n at the final level (1d only; nan when extinct)."""
        last = self.levels[-1]
        if last.empty or last.level == 0 or self.lattice != "1d-diagonal":
            return float("nan")
        return last.right / last.level


def _as_oracle(p, key):
    if callable(p):
        return p
    p = float(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return lambda site, level: bool(_op_open(key, p, site, level))


def _step(wet, is_open, lattice, level):
    nxt = set()
    for s in wet:
        if not is_open(s, level):
            continue
        if lattice == "1d-diagonal":
            nxt.update((s - 1, s + 1))
        else:
            m, n = s
            nxt.update(((m + 1, n), (m, n + 1)))
    return nxt


def _wetset(level, sites, lattice):
    if lattice == "1d-diagonal":
        return WetSet(level, np.array(sorted(sites), dtype=np.int64))
    return WetSet(level, np.array(sorted(sites), dtype=np.int64).reshape(-1, 2))


def oriented_percolation(p, n_levels, lattice="1d-diagonal", seed=0, with_bar=False) -> OPResult:
    """Level-by-level wet sets.

    ``p`` is a site-open probability (sites drawn from the counter RNG) or an
    oracle ``f(site, level) -> bool``; 1d sites are integers m with m + level
    even, NE sites are pairs (m, n) with m + n = level.  ``with_bar`` also runs
    the recursion from every site of level 0 in [-2 n_levels - 1, 2 n_levels + 1]
    (1d) or, on the NE lattice, from its single level-0 site.
    """
    if lattice not in LATTICES:
        raise ValueError(f"unknown lattice {lattice!r}")
    if n_levels < 1:
        raise ValueError("n_levels must be at least 1")
    key = as_key(seed)
    raw = _as_oracle(p, key)
    if lattice == "1d-diagonal":
        off = 2 * n_levels + 1
        is_open = (lambda s, k: raw(s, k)) if callable(p) else (lambda s, k: raw(s + off, k))
        start = {0}
        bar0 = {m for m in range(-off, off + 1) if m % 2 == 0}
    else:
        is_open = (lambda s, k: raw(s, k)) if callable(p) else \
            (lambda s, k: raw(s[0] * (n_levels + 2) + s[1], k))
        start = {(0, 0)}
        bar0 = {(0, 0)}
    runs = []
    for w0 in ([start, bar0] if with_bar else [start]):
        wet = set(w0)
        levels = [_wetset(0, wet, lattice)]
        for k in range(n_levels):
            wet = _step(wet, is_open, lattice, k)
            levels.append(_wetset(k + 1, wet, lattice))
        runs.append(levels)
    return OPResult(lattice, runs[0], runs[1] if with_bar else None)


def op_survival(p, n_levels, reps, seed, jobs=None):
    """1d survival frequency to level n and edge-speed estimates over survivors.

    Returns (survival, v_right, v_left) as EstimateCI; the speeds are nan when
    fewer than two replicas survive.
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    out = np.zeros((reps, 3))
    run_replicas(_op1d_kernel, reps, out, (as_key(seed), float(p), int(n_levels)), jobs)
    alive = out[:, 0] > 0
    surv = EstimateCI.proportion(int(alive.sum()), reps, seed)
    if alive.sum() >= 2:
        vr = EstimateCI.mean(out[alive, 1], seed)
        vl = EstimateCI.mean(out[alive, 2], seed)
    else:
        nan = float("nan")
        vr = vl = EstimateCI(nan, nan, (nan, nan), int(alive.sum()), int(seed))
    return surv, vr, vl


# ---------------------------------------------------------------------------
# dead zone of the d = 1 extinction construction


@njit(cache=True, nogil=True)
def _dominating_block(ev_t, ev_k, ev_s, ev_r, n, lo_site, hi_site, in_lo, in_hi, t_start, T):
    """Block started all-1 on sites [lo_site, hi_site] at t_start with the outside frozen at 1.

    Good iff no 1 in [in_lo, in_hi] during [t_start + T, t_start + 3T].
    """
    site_in = np.zeros(n, np.bool_)
    st = np.zeros(n, np.int8)
    for x in range(lo_site, hi_site + 1):
        site_in[x] = True
        st[x] = 1
    in_ones = in_hi - in_lo + 1
    i = np.searchsorted(ev_t, t_start, side="right")
    t_chk = t_start + T
    t_end = t_start + 3.0 * T
    checked = False
    while i < ev_t.shape[0] and ev_t[i] <= t_end:
        if not checked and ev_t[i] > t_chk:
            if in_ones > 0:
                return False
            checked = True
        s = ev_s[i]
        if lo_site <= s <= hi_site:
            old = _core.apply_event(st, _core.STERILE, ev_k[i], s, ev_r[i], site_in, 1)
            new = st[s]
            if in_lo <= s <= in_hi:
                if old == 1 and new != 1:
                    in_ones -= 1
                elif new == 1 and old != 1:
                    in_ones += 1
                    if checked:
                        return False
        i += 1
    return checked or in_ones == 0


@njit(cache=True)
def _count_violations(state0, ev_t, ev_k, ev_s, ev_r, dead, T):
    """Ones in dead[j] at time jT plus births into dead[j] during slot j."""
    st = state0.copy()
    n = st.shape[0]
    site_in = np.ones(n, np.bool_)
    n_slots = dead.shape[0]
    bad = 0
    j = 0
    for x in range(n):
        if dead[0, x] and st[x] == 1:
            bad += 1
    for i in range(ev_t.shape[0]):
        while j + 1 < n_slots and ev_t[i] > (j + 1) * T:
            j += 1
            for x in range(n):
                if dead[j, x] and st[x] == 1:
                    bad += 1
        s = ev_s[i]
        old = _core.apply_event(st, _core.STERILE, ev_k[i], s, ev_r[i], site_in, 0)
        if st[s] == 1 and old != 1 and dead[j, s]:
            bad += 1
    return bad


@dataclass
class DeadZoneAudit:
    violations: int
    levels: list
    open_blocks: dict
    dead_cells: int  # (slot, site) cells declared dead


def dead_zone_audit(open_sites, stream: EventStream, init: LatticeConfig, K, T, n_levels=None):
    """Count 1's of the stream's trajectory inside the dead zone.

    Blocks (m, n) with m + n even live at (mK, nT) + [-2K, 2K] x [0, 3T]; an
    open block clears [mK-K, mK+K] x [(n+1)T, (n+3)T].  Between the walls,
    [l_k K, r_k K] x [(k+1)T, (k+2)T] is dead while W_k is nonempty.
    ``open_sites`` is a callable (m, n) -> bool, a dict, or None to compute
    each needed block from the same stream with the outside frozen at 1.
    """
    box = stream.box
    if box.dim != 1 or box.boundary == "periodic":
        raise ValueError("the audit needs a one-dimensional, non-periodic box")
    if init.box != box:
        raise ValueError("initial configuration lives on a different box")
    K = int(K)
    if n_levels is None:
        n_levels = int(stream.horizon // T) - 3
    if n_levels < 1 or (n_levels + 2) * T > stream.horizon + 1e-9:
        raise ValueError("stream horizon must cover (n_levels + 2) T with n_levels >= 1")
    lo = box.lo[0]
    n = box.n_sites
    computed = {}

    def is_open(m, k):
        if (m, k) in computed:
            return computed[(m, k)]
        if open_sites is None:
            a, b = m * K - 2 * K - lo, m * K + 2 * K - lo
            if a < 0 or b >= n:
                res = False  # block sticks out of the simulated box: treat as closed
            else:
                res = bool(_dominating_block(stream.time, stream.kind, stream.site, stream.src, n,
                                             a, b, a + K, b - K, k * T, float(T)))
        elif callable(open_sites):
            res = bool(open_sites(m, k))
        else:
            res = bool(open_sites.get((m, k), False))
        computed[(m, k)] = res
        return res

    result = oriented_percolation(is_open, n_levels, "1d-diagonal")
    n_slots = int(math.ceil(stream.horizon / T))
    dead = np.zeros((n_slots, n), np.bool_)

    def mark(x0, x1, j):
        if 0 <= j < n_slots:
            a, b = max(x0 - lo, 0), min(x1 - lo, n - 1)
            if a <= b:
                dead[j, a:b + 1] = True

    for (m, k), ok in computed.items():
        if ok:
            mark(m * K - K, m * K + K, k + 1)
            mark(m * K - K, m * K + K, k + 2)
    for w in result.levels[1:]:
        if w.empty:
            break
        mark(w.left * K, w.right * K, w.level + 1)
    bad = _count_violations(init.state, stream.time, stream.kind, stream.site, stream.src, dead, float(T))
    return DeadZoneAudit(int(bad), result.levels, computed, int(dead.sum()))


def dead_zone_run(K, t0, beta, model: ModelParams, n_levels, seed, init="all-one"):
    """Build a stream wide enough for n_levels of the construction and audit it."""
    from .events import build_stream
    if model.dim != 1 or model.alpha <= 0:
        raise ValueError("the audit needs a one-dimensional model with alpha > 0")
    T = (t0 + beta) / model.alpha
    half = (n_levels + 3) * K
    box = Box.cube(half, 1)
    stream = build_stream(model, box, (n_levels + 3) * T, seed)
    if init == "all-one":
        cfg = LatticeConfig(box, np.ones(box.n_sites, np.int8))
    else:
        cfg = init
    return dead_zone_audit(None, stream, cfg, K, T, n_levels)


# ---------------------------------------------------------------------------
# finite space-time condition


@njit(cache=True, nogil=True)
def _cube_full(st, cube):
    for j in range(cube.shape[0]):
        if st[cube[j]] != 1:
            return False
    return True


@njit(cache=True, nogil=True)
def _stc_kernel(r0, r1, out, base, n, e_src, e_dst, rates, caps, start, cubes1, cubes2,
                in_slab, T):
    site_in = np.ones(n, np.bool_)
    for r in range(r0, r1):
        key = _core.replica_key(base, r)
        st = start.copy()
        ones = _core.count_ones(st)
        et, ek, es, er = _core.generate(key, n, e_src, e_dst, rates, caps, T + 1.0)
        hit2 = False
        at1 = False
        for i in range(et.shape[0]):
            if not at1 and et[i] > 1.0:
                at1 = True
                for c in range(cubes2.shape[0]):
                    if _cube_full(st, cubes2[c]):
                        hit2 = True
                        break
            s = es[i]
            old = _core.apply_event(st, _core.STERILE, ek[i], s, er[i], site_in, 0)
            new = st[s]
            if old == 1 and new != 1:
                ones -= 1
                if ones == 0:
                    break
            elif new == 1 and old != 1:
                ones += 1
                if at1 and not hit2 and in_slab[s]:
                    for c in range(cubes2.shape[0]):
                        if _cube_full(st, cubes2[c]):
                            hit2 = True
                            break
        if not at1 and ones > 0:
            for c in range(cubes2.shape[0]):
                if _cube_full(st, cubes2[c]):
                    hit2 = True
                    break
        hit1 = False
        if ones > 0:
            for c in range(cubes1.shape[0]):
                if _cube_full(st, cubes1[c]):
                    hit1 = True
                    break
        out[r - r0, 0] = 1.0 if hit1 else 0.0
        out[r - r0, 1] = 1.0 if hit2 else 0.0


def _cubes(box: Box, centers, n):
    offs = np.array(np.meshgrid(*[np.arange(-n, n + 1)] * box.dim, indexing="ij")).reshape(box.dim, -1).T
    return np.array([[box.index(tuple(c + o)) for o in offs] for c in centers], dtype=np.int64)


def space_time_condition(n, L, T, model: ModelParams, reps, seed, jobs=None):
    """(P1, P2) for the truncated process on [-(L+2n), L+2n]^d from chi_[-n,n]^d.

    P1: at time T+1 some x + [-n,n]^d with x in [0,L)^d is all 1's.
    P2: at some time in [1, T+1] some x + [-n,n]^d with x in {L+n} x [0,L)^(d-1) is all 1's.
    """
    n, L = int(n), int(L)
    if n < 0 or L < 1 or T < 0:
        raise ValueError("need n >= 0, L >= 1 and T >= 0")
    d = model.dim
    box = Box.cube(L + 2 * n, d)
    start = np.where(np.all(np.abs(box.coords) <= n, axis=1), 1, -1).astype(np.int8)
    grid = [np.arange(L)] * d
    c1 = np.array(np.meshgrid(*grid, indexing="ij")).reshape(d, -1).T
    c2 = np.array(np.meshgrid(*([np.array([L + n])] + [np.arange(L)] * (d - 1)), indexing="ij")).reshape(d, -1).T
    cubes1 = _cubes(box, c1, n)
    cubes2 = _cubes(box, c2, n)
    in_slab = np.zeros(box.n_sites, np.bool_)
    in_slab[np.unique(cubes2)] = True
    e_src, e_dst = box.edges
    rates, caps = model.rate_arrays()
    out = np.zeros((reps, 2))
    args = (as_key(seed), box.n_sites, e_src, e_dst, rates, caps, start, cubes1, cubes2,
            in_slab, float(T))
    run_replicas(_stc_kernel, reps, out, args, jobs)
    return (EstimateCI.proportion(int(out[:, 0].sum()), reps, seed),
            EstimateCI.proportion(int(out[:, 1].sum()), reps, seed))


# ---------------------------------------------------------------------------
# generic one-dimensional block event


@njit(cache=True, nogil=True)
def _generic_kernel(r0, r1, out, base, L, T, h_min, rates, caps, e_src, e_dst):
    n = 8 * L + 1  # sites -4L..4L
    site_in = np.ones(n, np.bool_)
    for r in range(r0, r1):
        key = _core.replica_key(base, r)
        st = np.zeros(n, np.int8)
        # h_min ones placed uniformly at random in [-L, L] (Floyd's sampling)
        width = 2 * L + 1
        for j in range(width - h_min, width):
            u, _ = uniform_pair(key, _core.TAG_INIT, j, 0)
            c = int(u * (j + 1))
            x = 3 * L + c
            if st[x] == 1:
                x = 3 * L + j
            st[x] = 1
        et, ek, es, er = _core.generate(key, n, e_src, e_dst, rates, caps, T)
        for i in range(et.shape[0]):
            _core.apply_event(st, _core.STERILE, ek[i], es[i], er[i], site_in, 0)
        left = 0
        right = 0
        for x in range(L, 3 * L + 1):
            left += st[x] == 1
            right += st[x + 4 * L] == 1
        out[r - r0] = 1.0 if (left >= h_min and right >= h_min) else 0.0


def generic_block_prob(L, T, model: ModelParams, h_min, reps, seed, jobs=None) -> EstimateCI:
    """P(both [-3L,-L] and [L,3L] have at least h_min ones at time T).

    Start: h_min ones uniformly placed in [-L, L], zeros elsewhere; only the
    Poisson points of [-4L, 4L] x [0, T] are used.
    """
    if model.dim != 1:
        raise ValueError("the generic block is one-dimensional")
    L, h_min = int(L), int(h_min)
    if not (1 <= h_min <= 2 * L + 1) or T <= 0:
        raise ValueError("need 1 <= h_min <= 2L+1 and T > 0")
    BlockSpec("generic-1d", model, float(T), K=L, h_min=h_min)
    box = Box.cube(4 * L, 1)
    e_src, e_dst = box.edges
    rates, caps = model.rate_arrays()
    out = np.zeros(reps)
    run_replicas(_generic_kernel, reps, out,
                 (as_key(seed), L, float(T), h_min, rates, caps, e_src, e_dst), jobs)
    return EstimateCI.proportion(int(out.sum()), reps, seed)
