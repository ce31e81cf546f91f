"""Finite boxes of Z^d, neighbourhoods, rectangles and site paths."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import product

import numpy as np

BOUNDARIES = ("vacant", "periodic", "occupied")
ADJACENCIES = ("Z", "L*")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo, hi] (inclusive) in Z^d.

    boundary:
      vacant    sites outside are always 0 (no arrows from outside)
      periodic  coordinates wrap
      occupied  sites outside are frozen at 1 and fire arrows inward
    """

    dim: int
    lo: tuple
    hi: tuple
    boundary: str = "vacant"

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.dim not in (1, 2, 3) or len(lo) != self.dim or len(hi) != self.dim:
            raise ValueError("box bounds must match dim (1..3)")
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError("empty box")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @classmethod
    def cube(cls, half: int, dim: int = 1, boundary: str = "vacant") -> "Box":
        return cls(dim, (-half,) * dim, (half,) * dim, boundary)

    @property
    def shape(self):
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.shape))

    def contains(self, site) -> bool:
        return all(l <= s <= h for s, l, h in zip(site, self.lo, self.hi))

    def index(self, site) -> int:
        site = tuple(site)
        if len(site) != self.dim or not self.contains(site):
            raise ValueError(f"site {site} outside box")
        idx = 0
        for s, l, n in zip(site, self.lo, self.shape):
            idx = idx * n + (s - l)
        return idx

    def site(self, idx: int) -> tuple:
        out = []
        for l, n in zip(reversed(self.lo), reversed(self.shape)):
            out.append(idx % n + l)
            idx //= n
        return tuple(reversed(out))

    def sites(self):
        return list(product(*[range(l, h + 1) for l, h in zip(self.lo, self.hi)]))

    @cached_property
    def coords(self) -> np.ndarray:
        """(n_sites, dim) integer coordinates in index order."""
        return np.array(self.sites(), dtype=np.int64).reshape(self.n_sites, self.dim)

    @property
    def origin(self) -> int:
        return self.index((0,) * self.dim)

    def indices(self, sites) -> np.ndarray:
        return np.array([self.index(s) for s in sites], dtype=np.int64)

    def mask(self, sites) -> np.ndarray:
        m = np.zeros(self.n_sites, dtype=np.bool_)
        for s in sites:
            m[self.index(s)] = True
        return m

    @property
    def edges(self):
        """Directed nearest-neighbour edges as (src, dst) int32 arrays.

        Real edges come first in lexicographic (src, dst) order; for the
        occupied boundary, ghost edges (src = -1) follow in (dst, direction) order.
        """
        return _box_edges(self)


@lru_cache(maxsize=64)
def _box_edges(box: Box):
    shape = box.shape
    n = box.n_sites
    grid = np.arange(n).reshape(shape)
    src, dst, gdst = [], [], []
    for k in range(box.dim):
        for d in (-1, 1):
            if box.boundary == "periodic":
                if shape[k] == 1 or (shape[k] == 2 and d == 1):
                    continue  # self-loop or duplicate neighbour
                nb = np.roll(grid, -d, axis=k)
                src.append(grid.ravel())
                dst.append(nb.ravel())
                continue
            sl_src = [slice(None)] * box.dim
            sl_dst = [slice(None)] * box.dim
            if d == 1:
                sl_src[k] = slice(0, shape[k] - 1)
                sl_dst[k] = slice(1, shape[k])
                edge_face = [slice(None)] * box.dim
                edge_face[k] = slice(shape[k] - 1, shape[k])
            else:
                sl_src[k] = slice(1, shape[k])
                sl_dst[k] = slice(0, shape[k] - 1)
                edge_face = [slice(None)] * box.dim
                edge_face[k] = slice(0, 1)
            src.append(grid[tuple(sl_src)].ravel())
            dst.append(grid[tuple(sl_dst)].ravel())
            if box.boundary == "occupied":
                gdst.append(grid[tuple(edge_face)].ravel())
    src = np.concatenate(src) if src else np.zeros(0, np.int64)
    dst = np.concatenate(dst) if dst else np.zeros(0, np.int64)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    if gdst:
        g = np.sort(np.concatenate(gdst), kind="stable")
        src = np.concatenate([src, np.full(len(g), -1)])
        dst = np.concatenate([dst, g])
    return src.astype(np.int32), dst.astype(np.int32)


def _raw_neighbors(site):
    out = []
    for k in range(len(site)):
        for d in (-1, 1):
            t = list(site)
            t[k] += d
            out.append(tuple(t))
    return out


def neighbors(site, box: Box | None = None, adjacency: str = "Z"):
    """Neighbours of ``site``; inside ``box`` if given (wrapped when periodic).

    ``adjacency='L*'`` (d=2 only) adds the four diagonal neighbours.
    """
    site = tuple(int(v) for v in site)
    if adjacency not in ADJACENCIES:
        raise ValueError(f"unknown adjacency {adjacency!r}")
    if adjacency == "Z":
        raw = _raw_neighbors(site)
    else:
        if len(site) != 2:
            raise ValueError("L* adjacency is defined for d=2 only")
        x, y = site
        raw = [(x + a, y + b) for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0)]
    if box is None:
        return raw
    if not box.contains(site):
        raise ValueError(f"site {site} outside box")
    out = []
    for t in raw:
        if box.boundary == "periodic":
            t = tuple((v - l) % n + l for v, l, n in zip(t, box.lo, box.shape))
            if t != site and t not in out:
                out.append(t)
        elif box.contains(t):
            out.append(t)
    return out


@dataclass(frozen=True)
class Rect:
    """Closed rectangle [x0, x1] x [y0, y1] in Z^2."""

    x0: int
    x1: int
    y0: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError("empty rectangle")

    @property
    def width(self):
        return self.x1 - self.x0 + 1

    @property
    def height(self):
        return self.y1 - self.y0 + 1

    def shift(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x0 + dx, self.x1 + dx, self.y0 + dy, self.y1 + dy)

    def contains(self, site) -> bool:
        return self.x0 <= site[0] <= self.x1 and self.y0 <= site[1] <= self.y1

    def inside(self, box: Box) -> bool:
        return box.contains((self.x0, self.y0)) and box.contains((self.x1, self.y1))


def int_pow_floor(n: int, eta: float) -> int:
    """floor(n**eta), robust to rounding just below an exact integer."""
    w = int(math.floor(n ** eta))
    if (w + 1) ** (1.0 / eta) <= n * (1 + 1e-12):
        w += 1
    return w


def make_rectangles(N: int, eta: float):
    """The four thin rectangles Q1..Q4 inside [-N, N]^2.

    Q1, Q3 are tall (crossed top-to-bottom), Q2, Q4 are wide (crossed left-right).
    """
    if N < 8:
        raise ValueError("N must be at least 8")
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    a = N // 3
    w = int_pow_floor(N, eta)
    if w < 1:
        raise ValueError("floor(N**eta) must be at least 1")
    # for eta near 1 the strips would stick out of [-N, N]^2; clip them
    lo, hi = max(-N, -a - w), min(N, a + w)
    q1 = Rect(lo, -a + w, -N, N)
    q2 = Rect(-N, N, a - w, hi)
    q3 = Rect(a - w, hi, -N, N)
    q4 = Rect(-N, N, lo, -a + w)
    return q1, q2, q3, q4


@dataclass(frozen=True)
class SitePath:
    """A finite nearest-neighbour path of sites."""

    sites: tuple
    adjacency: str = "Z"

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(tuple(int(v) for v in s) for s in self.sites))
        for a, b in zip(self.sites, self.sites[1:]):
            if b not in neighbors(a, None, self.adjacency):
                raise ValueError(f"sites {a} and {b} are not adjacent")

    def __len__(self):
        return len(self.sites)


def embed_path(path: SitePath) -> dict:
    """Map each site of a self-avoiding path to its position along the path."""
    out = {}
    for i, s in enumerate(path.sites):
        if s in out:
            raise ValueError(f"path revisits site {s}")
        out[s] = i
    return out
