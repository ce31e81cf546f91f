"""Evolution of the sterile model, Remenik's process, the contact process and
the bare 0/-1 environment on a shared event stream."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from numba import njit

from . import _core
from .events import EventStream, ModelParams
from .lattice import Box
from .parallel import run_replicas
from .rng import as_key, uniform_pair, TAG_CHAIN
from .stats import EstimateCI


class ModelVariant(IntEnum):
    STERILE = _core.STERILE
    REMENIK = _core.REMENIK
    CONTACT = _core.CONTACT
    ENV = _core.ENV

    @classmethod
    def parse(cls, v) -> "ModelVariant":
        if isinstance(v, cls):
            return v
        key = str(v).strip().lower().replace("-", "").replace("_", "")
        names = {"sterile": cls.STERILE, "xi": cls.STERILE, "remenik": cls.REMENIK,
                 "eta": cls.REMENIK, "contact": cls.CONTACT, "zeta": cls.CONTACT,
                 "env": cls.ENV, "twostateenv": cls.ENV}
        if key not in names:
            raise ValueError(f"unknown model variant {v!r}")
        return names[key]


@dataclass
class LatticeConfig:
    """State in {-1, 0, 1} for every site of a box (index order)."""

    box: Box
    state: np.ndarray

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=np.int8).copy()
        if self.state.shape != (self.box.n_sites,):
            raise ValueError("state length does not match box")
        if not np.all((self.state >= -1) & (self.state <= 1)):
            raise ValueError("states must lie in {-1, 0, 1}")

    @classmethod
    def from_sites(cls, box, ones=(), minus=(), default=0):
        st = np.full(box.n_sites, default, dtype=np.int8)
        for s in ones:
            st[box.index(s)] = 1
        for s in minus:
            st[box.index(s)] = -1
        return cls(box, st)

    def __getitem__(self, site):
        return int(self.state[self.box.index(site)])

    def counts(self):
        return (int(np.sum(self.state == 1)), int(np.sum(self.state == 0)),
                int(np.sum(self.state == -1)))

    def sites_in(self, value):
        return [self.box.site(i) for i in np.flatnonzero(self.state == value)]

    def leq(self, other: "LatticeConfig") -> bool:
        return bool(np.all(self.state <= other.state))


@dataclass
class Trajectory:
    box: Box
    times: np.ndarray
    configs: np.ndarray  # (n_samples, n_sites) int8

    @property
    def counts(self) -> np.ndarray:
        """(n_samples, 3) array of (#1, #0, #-1)."""
        c = self.configs
        return np.stack([(c == 1).sum(1), (c == 0).sum(1), (c == -1).sum(1)], axis=1)

    def config(self, k) -> LatticeConfig:
        return LatticeConfig(self.box, self.configs[k])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "count_plus1", "count_zero", "count_minus1"])
            for t, (a, b, c) in zip(self.times, self.counts):
                w.writerow([repr(float(t)), int(a), int(b), int(c)])


INIT_KINDS = {
    "all-one": _core.INIT_ALL_ONE,
    "single-one-at-origin": _core.INIT_SINGLE,
    "product": _core.INIT_PRODUCT,
    "mu_rho": _core.INIT_MU_RHO,
    "nu_C": _core.INIT_NU_C,
    "fixed": _core.INIT_FIXED,
    "set": _core.INIT_SET,
    "chi": _core.INIT_CHI,
}


@dataclass(frozen=True)
class InitSpec:
    """Law of the initial configuration.

    kinds: all-one, single-one-at-origin, product (probs = (p_minus, p_zero, p_plus)),
    mu_rho (-1 with probability 1/(1+theta), else 0), nu_C (mu_rho, then 1 on the
    sites of ``sites`` not drawn -1), fixed (``config``), set (1 on ``sites``, 0
    elsewhere), chi (1 on ``sites``, -1 elsewhere).
    """

    kind: str
    probs: tuple | None = None
    sites: tuple = ()
    theta: float | None = None
    config: LatticeConfig | None = None

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValueError(f"unknown initial law {self.kind!r}")
        if self.kind == "product":
            if self.probs is None or len(self.probs) != 3:
                raise ValueError("product law needs (p_minus, p_zero, p_plus)")
            if any(not (0 <= p <= 1) for p in self.probs) or abs(sum(self.probs) - 1) > 1e-9:
                raise ValueError("product probabilities must lie in [0,1] and sum to 1")
        if self.kind in ("mu_rho", "nu_C") and not (self.theta and self.theta > 0):
            raise ValueError("mu_rho and nu_C need theta > 0")
        if self.kind == "fixed" and self.config is None:
            raise ValueError("fixed law needs a config")

    def compile(self, box: Box):
        """Arguments for the compiled sampler: (kind, probs, mask, origin, template)."""
        probs = np.zeros(3)
        if self.kind == "product":
            probs[:] = self.probs
        elif self.kind in ("mu_rho", "nu_C"):
            probs[0] = 1.0 / (1.0 + self.theta)
        mask = box.mask(self.sites) if self.sites else np.zeros(box.n_sites, np.bool_)
        template = np.zeros(box.n_sites, np.int8)
        if self.kind == "fixed":
            if self.config.box != box:
                raise ValueError("fixed configuration lives on a different box")
            template = self.config.state.copy()
        origin = box.origin if box.contains((0,) * box.dim) else 0
        if self.kind == "single-one-at-origin" and not box.contains((0,) * box.dim):
            raise ValueError("origin is not in the box")
        return INIT_KINDS[self.kind], probs, mask, origin, template

    def draw(self, box: Box, seed: int) -> "LatticeConfig":
        k, probs, mask, origin, template = self.compile(box)
        return LatticeConfig(box, _core.sample_init(as_key(seed), box.n_sites, k, probs, mask,
                                                    origin, template))

    def may_have_minus(self) -> bool:
        if self.kind in ("mu_rho", "nu_C", "chi"):
            return True
        if self.kind == "product":
            return self.probs[0] > 0
        if self.kind == "fixed":
            return bool(np.any(self.config.state == -1))
        return False


def sample_initial(kind: str, spec: dict | None, box: Box, seed: int) -> LatticeConfig:
    """One draw of an initial configuration (see ``InitSpec`` for the kinds)."""
    return InitSpec(kind, **(spec or {})).draw(box, seed)


def _check_sample_times(sample_times, horizon):
    ts = np.asarray(sample_times, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError("need at least one sample time")
    if np.any(np.diff(ts) < 0):
        raise ValueError("sample times must be nondecreasing")
    if ts[0] < 0 or ts[-1] > horizon:
        raise ValueError("sample times must lie in [0, horizon]")
    return ts


def evolve(variant, init: LatticeConfig, stream: EventStream, sample_times) -> Trajectory:
    """Apply the stream's events in time order and record the sampled states."""
    variant = ModelVariant.parse(variant)
    if init.box != stream.box:
        raise ValueError("initial configuration and stream live on different boxes")
    if variant == ModelVariant.CONTACT and np.any(init.state == -1):
        raise ValueError("the contact process has no -1 state")
    ts = _check_sample_times(sample_times, stream.horizon)
    n = init.box.n_sites
    out = np.empty((ts.size, n), dtype=np.int8)
    st = init.state.copy()
    site_in = np.ones(n, np.bool_)
    t, k, s, r = stream.arrays()
    _core.evolve_record(int(variant), st, t, k, s, r, 0, site_in, np.int8(0), ts, out)
    return Trajectory(init.box, ts, out)


def coupled_evolve(runs, stream: EventStream, sample_times, pairs=None):
    """Evolve several (variant, init) pairs on one stream.

    ``pairs`` lists (i, j) meaning "run i should stay below run j"; the default
    is every consecutive pair.  Returns the trajectories and a report mapping
    each pair to a per-sample-time list of booleans.
    """
    trajs = [evolve(v, init, stream, sample_times) for v, init in runs]
    if pairs is None:
        pairs = [(i, i + 1) for i in range(len(runs) - 1)]
    report = {}
    for i, j in pairs:
        report[(i, j)] = [bool(np.all(a <= b)) for a, b in zip(trajs[i].configs, trajs[j].configs)]
    return trajs, report


# ---------------------------------------------------------------------------
# replica kernels on chunked streams


@njit(cache=True, nogil=True)
def _final_state_kernel(r0, r1, out, base, variant, n, e_src, e_dst, rates, caps,
                        ik, iprobs, imask, iorigin, itemplate, t_end):
    site_in = np.ones(n, np.bool_)
    dt = _core.chunk_length(n, e_src.shape[0], caps, t_end)
    for r in range(r0, r1):
        key = _core.replica_key(base, r)
        st = _core.sample_init(key, n, ik, iprobs, imask, iorigin, itemplate)
        nxt, keep, cnt = _core.cursor_new(key, n, e_src.shape[0], rates, caps)
        t = 0.0
        while True:
            t_hi = min(t + dt, t_end)
            last = t_hi >= t_end
            et, ek, es, er = _core.cursor_fill(key, n, e_src, e_dst, rates, caps,
                                               nxt, keep, cnt, t, t_hi, last)
            for i in range(et.shape[0]):
                _core.apply_event(st, variant, ek[i], es[i], er[i], site_in, 0)
            t = t_hi
            if last:
                break
        out[r - r0, :] = st


@njit(cache=True, nogil=True)
def _survival_kernel(r0, r1, out, base, variant, n, e_src, e_dst, rates, caps,
                     ik, iprobs, imask, iorigin, itemplate, t_end):
    """out[:, 0] = survived to t_end, out[:, 1] = extinction time (or t_end)."""
    site_in = np.ones(n, np.bool_)
    dt = _core.chunk_length(n, e_src.shape[0], caps, t_end)
    for r in range(r0, r1):
        key = _core.replica_key(base, r)
        st = _core.sample_init(key, n, ik, iprobs, imask, iorigin, itemplate)
        ones = _core.count_ones(st)
        nxt, keep, cnt = _core.cursor_new(key, n, e_src.shape[0], rates, caps)
        t = 0.0
        t_ext = t_end
        while ones > 0:
            t_hi = min(t + dt, t_end)
            last = t_hi >= t_end
            et, ek, es, er = _core.cursor_fill(key, n, e_src, e_dst, rates, caps,
                                               nxt, keep, cnt, t, t_hi, last)
            for i in range(et.shape[0]):
                s = es[i]
                old = _core.apply_event(st, variant, ek[i], s, er[i], site_in, 0)
                new = st[s]
                if old == 1 and new != 1:
                    ones -= 1
                    if ones == 0:
                        t_ext = et[i]
                        break
                elif new == 1 and old != 1:
                    ones += 1
            t = t_hi
            if last:
                break
        if ones > 0:
            out[r - r0, 0] = 1.0
            out[r - r0, 1] = t_end
        else:
            out[r - r0, 0] = 0.0
            out[r - r0, 1] = t_ext if t_ext < t_end else 0.0


def _kernel_args(variant, params: ModelParams, box: Box, init: InitSpec, seed):
    variant = ModelVariant.parse(variant)
    if box.dim != params.dim:
        raise ValueError("box and model dimension differ")
    if variant == ModelVariant.CONTACT and init.may_have_minus():
        raise ValueError("the contact process has no -1 state")
    e_src, e_dst = box.edges
    rates, caps = params.rate_arrays()
    ik, probs, mask, origin, template = init.compile(box)
    return (as_key(seed), int(variant), box.n_sites, e_src, e_dst, rates, caps,
            ik, probs, mask, origin, template)


def final_states(variant, params, box, init: InitSpec, t_end, reps, seed, jobs=None):
    """Configuration at time t_end for each of ``reps`` independent replicas."""
    if t_end <= 0 or reps <= 0:
        raise ValueError("need t_end > 0 and reps > 0")
    args = _kernel_args(variant, params, box, init, seed) + (float(t_end),)
    out = np.zeros((reps, box.n_sites), np.int8)
    return run_replicas(_final_state_kernel, reps, out, args, jobs)


def survival_runs(variant, params, box, init: InitSpec, t_end, reps, seed, jobs=None):
    """(reps, 2) array: survival indicator at t_end and extinction time."""
    if t_end <= 0 or reps <= 0:
        raise ValueError("need t_end > 0 and reps > 0")
    args = _kernel_args(variant, params, box, init, seed) + (float(t_end),)
    out = np.zeros((reps, 2))
    return run_replicas(_survival_kernel, reps, out, args, jobs)


# ---------------------------------------------------------------------------
# single-site comparison chain


@njit(cache=True)
def _chain_occupation(key, up, down, arr, rem, t_total, n_batches):
    """Time spent in states (1, 0, -1) per batch by a single-site chain."""
    occ = np.zeros((n_batches, 3))
    blen = t_total / n_batches
    state = 0
    t = 0.0
    j = 0
    b = 0
    while b < n_batches:
        if state == 1:
            rate = down
        elif state == 0:
            rate = up + arr
        else:
            rate = rem
        u1, u2 = uniform_pair(key, TAG_CHAIN, 0, j)
        j += 1
        hold = -np.log1p(-u1) / rate
        t_next = t + hold
        idx = 1 - state
        while b < n_batches and t_next >= (b + 1) * blen:
            occ[b, idx] += (b + 1) * blen - t
            t = (b + 1) * blen
            b += 1
        if b >= n_batches:
            break
        occ[b, idx] += t_next - t
        t = t_next
        if state == 1:
            state = 0
        elif state == 0:
            state = 1 if u2 * (up + arr) < up else -1
        else:
            state = 0
    return occ / blen


def comparison_chain(lam, theta, alpha, dim, t_total, seed, n_batches=100):
    """Long-run state frequencies of the single-site chain with 0->1 at rate 2*dim*lam.

    Returns {1: EstimateCI, 0: ..., -1: ...}; standard errors from batch means.
    """
    if alpha <= 0 or theta <= 0 or lam < 0:
        raise ValueError("need alpha > 0, theta > 0, lam >= 0")
    occ = _chain_occupation(as_key(seed), 2 * dim * lam, 1.0, alpha, theta * alpha,
                            float(t_total), int(n_batches))
    return {s: EstimateCI.mean(occ[:, k], seed) for k, s in enumerate((1, 0, -1))}


def env_minus_fraction(theta, alpha, t):
    """P(site is -1 at time t) for the 0/-1 chain started at 0."""
    return (1.0 - math.exp(-(1.0 + theta) * alpha * t)) / (1.0 + theta)


# ---------------------------------------------------------------------------
# positive correlations


def _increasing_indicator(states, box, spec):
    """1{state(x) >= level for every (x, level) in spec}, vectorized over replicas."""
    ok = np.ones(states.shape[0], dtype=bool)
    for site, level in spec:
        ok &= states[:, box.index(site)] >= level
    return ok.astype(float)


def positive_correlation(params, box, A, f, g, t, reps, seed, jobs=None):
    """Covariance of two increasing indicators at time t, started from chi_A.

    f and g are lists of (site, level).  Returns (cov, stderr).
    """
    init = InitSpec("chi", sites=tuple(tuple(a) for a in A))
    states = final_states(ModelVariant.STERILE, params, box, init, t, reps, seed, jobs)
    fv = _increasing_indicator(states, box, f)
    gv = _increasing_indicator(states, box, g)
    cov = float(np.mean(fv * gv) - fv.mean() * gv.mean())
    prod = (fv - fv.mean()) * (gv - gv.mean())
    se = float(prod.std(ddof=1) / math.sqrt(reps))
    return cov, se
