"""Counter-based random numbers (Philox4x32-10).

Every draw is a pure function of ``(key, counter)``.  Streams are addressed by a
tag and a location index instead of by construction order, so rebuilding any
single stream is bit-for-bit reproducible and no two streams share state.
"""
import numpy as np
from numba import njit

M0 = np.uint64(0xD2511F53)
M1 = np.uint64(0xCD9E8D57)
W0 = np.uint64(0x9E3779B9)
W1 = np.uint64(0xBB67AE85)
MASK32 = np.uint64(0xFFFFFFFF)
SH32 = np.uint64(32)
SH5 = np.uint64(5)
SH6 = np.uint64(6)

# stream tags (third counter word)
TAG_DEATH = 0
TAG_ARROW = 1
TAG_ARRIVAL = 2
TAG_REMOVAL = 3
TAG_INIT = 4
TAG_PERC = 5
TAG_REPLICA = 6
TAG_OP = 7
TAG_GRID = 8
TAG_CHAIN = 9
TAG_SPLIT = 10


@njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on a 4x32 counter with a 2x32 key (all as uint64 words)."""
    c0 = np.uint64(c0) & MASK32
    c1 = np.uint64(c1) & MASK32
    c2 = np.uint64(c2) & MASK32
    c3 = np.uint64(c3) & MASK32
    k0 = np.uint64(k0) & MASK32
    k1 = np.uint64(k1) & MASK32
    for _ in range(10):
        p0 = M0 * c0
        p1 = M1 * c2
        hi0 = p0 >> SH32
        lo0 = p0 & MASK32
        hi1 = p1 >> SH32
        lo1 = p1 & MASK32
        n0 = hi1 ^ c1 ^ k0
        n2 = hi0 ^ c3 ^ k1
        c0 = n0
        c1 = lo1
        c2 = n2
        c3 = lo0
        k0 = (k0 + W0) & MASK32
        k1 = (k1 + W1) & MASK32
    return c0, c1, c2, c3


@njit(cache=True)
def _to_unit(a, b):
    # 53-bit double in [0, 1)
    hi = a >> SH5
    lo = b >> SH6
    return (np.float64(hi) * 67108864.0 + np.float64(lo)) / 9007199254740992.0


@njit(cache=True)
def uniform_pair(key, tag, loc, j):
    """Two independent U[0,1) draws for draw index ``j`` of stream ``(tag, loc)``."""
    key = np.uint64(key)
    j = np.uint64(j)
    w0, w1, w2, w3 = philox4x32(j & MASK32, np.uint64(loc), np.uint64(tag),
                                j >> SH32, key & MASK32, key >> SH32)
    return _to_unit(w0, w1), _to_unit(w2, w3)


@njit(cache=True)
def derive_key(key, tag, index):
    """Child key for ``index`` under ``tag``; used for replica and grid seeds."""
    key = np.uint64(key)
    idx = np.uint64(index)
    w0, w1, w2, w3 = philox4x32(idx & MASK32, idx >> SH32, np.uint64(tag),
                                np.uint64(0x5EED), key & MASK32, key >> SH32)
    return (w1 << SH32) | w0


def as_key(seed):
    """Coerce a Python integer seed to a uint64 key."""
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return np.uint64(seed & 0xFFFFFFFFFFFFFFFF)


def replica_key(seed, r):
    return np.uint64(derive_key(as_key(seed), TAG_REPLICA, int(r)))


def split_key(seed, index):
    """Independent sub-seed (e.g. the two sides of a comparison, or sweep rows)."""
    return int(derive_key(as_key(seed), TAG_SPLIT, int(index)))


def grid_seed(seed, index):
    return int(derive_key(as_key(seed), TAG_GRID, int(index)))
