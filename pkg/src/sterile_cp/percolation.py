"""Site percolation on Z^2 and on its matching lattice L* (diagonals added)."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .lattice import Box, Rect, make_rectangles
from .parallel import run_replicas
from .rng import as_key, uniform_pair, TAG_PERC
from .stats import EstimateCI, linfit
from .estimators import kill_rate_q
from . import _core

TOP_BOTTOM = "top-bottom"
LEFT_RIGHT = "left-right"


def _adj8(adjacency: str) -> bool:
    if adjacency not in ("Z", "L*"):
        raise ValueError(f"unknown adjacency {adjacency!r}")
    return adjacency == "L*"


@dataclass
class PercGrid:
    box: Box
    open: np.ndarray  # bool, box index order
    adjacency: str = "Z"
    p: float = float("nan")

    def __post_init__(self):
        if self.box.dim != 2:
            raise ValueError("percolation grids are two-dimensional")
        self.open = np.asarray(self.open, dtype=np.bool_)
        if self.open.shape != (self.box.n_sites,):
            raise ValueError("open mask does not match box")
        _adj8(self.adjacency)

    def as_array(self) -> np.ndarray:
        """open[x - x0, y - y0]."""
        return self.open.reshape(self.box.shape)

    def dual(self) -> "PercGrid":
        """Matching grid: open* = closed, on the other adjacency."""
        other = "L*" if self.adjacency == "Z" else "Z"
        return PercGrid(self.box, ~self.open, other, 1.0 - self.p)


@njit(cache=True)
def _field(key, n):
    u = np.empty(n)
    for i in range(n):
        u[i], _ = uniform_pair(key, TAG_PERC, i, 0)
    return u


@njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return ra
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return ra


@njit(cache=True)
def _crossing(op, x0, x1, y0, y1, adj8, vertical):
    """Open crossing of op[x0..x1, y0..y1]; vertical joins y1 (top) to y0 (bottom)."""
    nx = x1 - x0 + 1
    ny = y1 - y0 + 1
    n = nx * ny
    parent = np.arange(n + 2)
    size = np.ones(n + 2, np.int64)
    src = n
    dst = n + 1
    for a in range(nx):
        for b in range(ny):
            if not op[x0 + a, y0 + b]:
                continue
            i = a * ny + b
            if vertical:
                if b == ny - 1:
                    _union(parent, size, i, src)
                if b == 0:
                    _union(parent, size, i, dst)
            else:
                if a == 0:
                    _union(parent, size, i, src)
                if a == nx - 1:
                    _union(parent, size, i, dst)
            if a + 1 < nx and op[x0 + a + 1, y0 + b]:
                _union(parent, size, i, i + ny)
            if b + 1 < ny and op[x0 + a, y0 + b + 1]:
                _union(parent, size, i, i + 1)
            if adj8 and a + 1 < nx:
                if b + 1 < ny and op[x0 + a + 1, y0 + b + 1]:
                    _union(parent, size, i, i + ny + 1)
                if b > 0 and op[x0 + a + 1, y0 + b - 1]:
                    _union(parent, size, i, i + ny - 1)
    return _find(parent, src) == _find(parent, dst)


def _rect_offsets(box: Box, rect: Rect):
    if not rect.inside(box):
        raise ValueError("rectangle is not inside the grid box")
    return (rect.x0 - box.lo[0], rect.x1 - box.lo[0], rect.y0 - box.lo[1], rect.y1 - box.lo[1])


def sample_grid(p: float, box: Box, adjacency: str, seed: int) -> PercGrid:
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    u = _field(as_key(seed), box.n_sites)
    return PercGrid(box, u < p, adjacency, p)


def has_crossing(grid: PercGrid, rect: Rect, direction: str) -> bool:
    if direction not in (TOP_BOTTOM, LEFT_RIGHT):
        raise ValueError(f"unknown direction {direction!r}")
    x0, x1, y0, y1 = _rect_offsets(grid.box, rect)
    return bool(_crossing(grid.as_array(), x0, x1, y0, y1, _adj8(grid.adjacency),
                          direction == TOP_BOTTOM))


@njit(cache=True, nogil=True)
def _four_kernel(r0, r1, out, base, p, N, rects):
    side = 2 * N + 1
    for r in range(r0, r1):
        key = _core.replica_key(base, r)
        u = _field(key, side * side)
        op = (u < p).reshape((side, side))
        ok = True
        for q in range(4):
            x0, x1, y0, y1 = rects[q, 0], rects[q, 1], rects[q, 2], rects[q, 3]
            if not _crossing(op, x0, x1, y0, y1, False, q % 2 == 0):
                ok = False
                break
        out[r - r0] = 1.0 if ok else 0.0


def four_crossings_prob(p, N, eta, reps, seed, jobs=None) -> EstimateCI:
    """P(Q1, Q3 crossed top-bottom and Q2, Q4 crossed left-right) on [-N, N]^2."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    box = Box.cube(N, 2)
    rects = np.array([_rect_offsets(box, q) for q in make_rectangles(N, eta)], dtype=np.int64)
    out = np.zeros(reps)
    run_replicas(_four_kernel, reps, out, (as_key(seed), float(p), int(N), rects), jobs)
    return EstimateCI.proportion(int(out.sum()), reps, seed)


@njit(cache=True, nogil=True)
def _cluster_kernel(r0, r1, out, base, p, nx, ny, ox, oy, adj8, cap):
    """out[:, 0] = min(|C0|, cap), out[:, 1] = 1 if C0 touches the box boundary."""
    n = nx * ny
    for r in range(r0, r1):
        key = _core.replica_key(base, r)
        u = _field(key, n)
        op = (u < p).reshape((nx, ny))
        if not op[ox, oy]:
            out[r - r0, 0] = 0
            out[r - r0, 1] = 0
            continue
        # breadth-first exploration of the origin cluster, stopped at cap
        seen = np.zeros((nx, ny), np.bool_)
        qx = np.empty(n, np.int64)
        qy = np.empty(n, np.int64)
        qx[0] = ox
        qy[0] = oy
        seen[ox, oy] = True
        head = 0
        tail = 1
        touch = False
        while head < tail and tail < cap:
            a = qx[head]
            b = qy[head]
            head += 1
            if a == 0 or b == 0 or a == nx - 1 or b == ny - 1:
                touch = True
            for da in range(-1, 2):
                for db in range(-1, 2):
                    if da == 0 and db == 0:
                        continue
                    if not adj8 and da != 0 and db != 0:
                        continue
                    c = a + da
                    d = b + db
                    if c < 0 or d < 0 or c >= nx or d >= ny:
                        continue
                    if op[c, d] and not seen[c, d]:
                        seen[c, d] = True
                        qx[tail] = c
                        qy[tail] = d
                        tail += 1
        out[r - r0, 0] = min(tail, cap)
        out[r - r0, 1] = 1 if touch else 0


@dataclass
class ClusterStats:
    sizes: np.ndarray  # min(|C0|, cap) per replica
    chi: EstimateCI
    boundary_fraction: float
    tail_n: np.ndarray
    tail_prob: np.ndarray
    gamma_hat: float  # minus the fitted slope of log P(|C0| >= n)
    slope: float
    r2: float
    size_cap: int

    def histogram(self):
        return np.bincount(self.sizes)


def cluster_stats(p, box: Box, adjacency: str, reps, seed, size_cap=10**6, min_count=20,
                  jobs=None) -> ClusterStats:
    """Origin-cluster size law, mean size and log-linear tail fit.

    A closed origin has cluster size 0.  The tail fit uses n = 1, 2, ... while at
    least ``min_count`` replicas have |C0| >= n.
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if box.dim != 2 or not box.contains((0, 0)):
        raise ValueError("need a two-dimensional box containing the origin")
    nx, ny = box.shape
    out = np.zeros((reps, 2), np.int64)
    args = (as_key(seed), float(p), nx, ny, -box.lo[0], -box.lo[1], _adj8(adjacency),
            int(min(size_cap, box.n_sites)))
    run_replicas(_cluster_kernel, reps, out, args, jobs)
    sizes = out[:, 0]
    touch = float(out[:, 1].mean())
    if touch > 0.01:
        warnings.warn(f"origin cluster reached the box boundary in {touch:.1%} of samples")
    chi = EstimateCI.mean(sizes, seed)
    ns, probs = [], []
    n = 1
    while n <= size_cap:
        c = int(np.sum(sizes >= n))
        if c < min_count:
            break
        ns.append(n)
        probs.append(c / reps)
        n += 1
    ns = np.array(ns)
    probs = np.array(probs)
    if ns.size >= 3:
        slope, _, _, r2 = linfit(ns, np.log(probs))
    else:
        slope, r2 = float("nan"), float("nan")
    return ClusterStats(sizes, chi, touch, ns, probs, -slope, slope, r2, int(size_cap))


@njit(cache=True, nogil=True)
def _square_kernel(r0, r1, out, base, p, side, adj8):
    for r in range(r0, r1):
        key = _core.replica_key(base, r)
        op = (_field(key, side * side) < p).reshape((side, side))
        out[r - r0] = 1.0 if _crossing(op, 0, side - 1, 0, side - 1, adj8, False) else 0.0


def square_crossing_prob(p, adjacency, N, reps, seed, jobs=None) -> EstimateCI:
    """Left-right open crossing of [0, N]^2; uniforms shared across p for a given seed."""
    out = np.zeros(reps)
    run_replicas(_square_kernel, reps, out, (as_key(seed), float(p), int(N) + 1, _adj8(adjacency)), jobs)
    return EstimateCI.proportion(int(out.sum()), reps, seed)


def _bisect(f, target, lo, hi, tol, flo=None, fhi=None):
    """Bisection on a nondecreasing estimate f; returns (lo, hi, evaluations)."""
    flo = f(lo) if flo is None else flo
    fhi = f(hi) if fhi is None else fhi
    if not (flo.value < target <= fhi.value):
        raise ValueError("initial interval does not bracket the target")
    evals = {lo: flo, hi: fhi}
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        evals[mid] = fm
        if fm.value < target:
            lo = mid
        else:
            hi = mid
    return lo, hi, evals


def _delta_ci(f, lo, hi, target, h, reps, seed):
    """Estimate at the bracket midpoint, stderr by the delta method."""
    mid = 0.5 * (lo + hi)
    a = f(max(0.0, mid - h))
    b = f(min(1.0, mid + h))
    slope = (b.value - a.value) / (min(1.0, mid + h) - max(0.0, mid - h))
    fm = f(mid)
    se_f = fm.stderr if fm.stderr > 0 else math.sqrt(0.25 / reps)
    se = se_f / slope if slope > 0 else float("inf")
    se = math.hypot(se, (hi - lo) / math.sqrt(12))
    if not math.isfinite(se):
        return EstimateCI(mid, se, (lo, hi), reps, seed)
    return EstimateCI.normal(mid, se, reps, seed)


def threshold_bisect(adjacency, N, target_prob, tol, reps_per_eval, seed, lo=0.0, hi=1.0,
                     jobs=None) -> EstimateCI:
    """p at which the left-right crossing probability of [0, N]^2 equals target_prob."""
    if not 0 < target_prob < 1 or tol <= 0:
        raise ValueError("need target in (0, 1) and tol > 0")
    f = lambda p: square_crossing_prob(p, adjacency, N, reps_per_eval, seed, jobs)
    lo, hi, _ = _bisect(f, target_prob, lo, hi, tol)
    return _delta_ci(f, lo, hi, target_prob, max(tol, 0.01), reps_per_eval, seed)


def chi_star(lam: float) -> float:
    """Mean cluster size solving -4 chi^2 log q_lam = 1."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return 1.0 / (2.0 * math.sqrt(-math.log(kill_rate_q(lam))))


def solve_p0(lam, tol, chi_estimator_budget, seed, half=12, p_hi=0.55, jobs=None) -> EstimateCI:
    """p with mean origin-cluster size chi(p) = chi_star(lam), by bisection with shared uniforms."""
    target = chi_star(lam)
    box = Box.cube(half, 2)
    reps = int(chi_estimator_budget)

    def f(p):
        with warnings.catch_warnings():
            # boundary contact at the upper bracket end is expected and harmless
            warnings.simplefilter("ignore")
            return cluster_stats(p, box, "Z", reps, seed, min_count=reps + 1, jobs=jobs).chi

    fhi = f(p_hi)
    if fhi.value < target:
        raise ValueError("target mean cluster size outside the estimable range")
    lo, hi, _ = _bisect(f, target, 0.0, p_hi, tol, fhi=fhi)
    return _delta_ci(f, lo, hi, target, max(tol, 0.005), reps, seed)
