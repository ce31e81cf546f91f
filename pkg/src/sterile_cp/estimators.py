"""Closed-form bounds from the block arguments, survival estimates and critical brackets."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .events import ModelParams
from .lattice import Box
from .process import InitSpec, ModelVariant, survival_runs
from .stats import EstimateCI, Z95

__all__ = ["EstimateCI", "PhaseBounds", "pi_equilibrium", "phase_bounds", "gap_threshold",
           "kill_per_try", "kill_rate_q", "erlang_tail", "rate_function", "c0", "survival_prob",
           "critical_bisect", "CriticalBracket"]


def pi_equilibrium(lam, theta, dim=1):
    """Stationary law (pi(1), pi(0), pi(-1)) of the single-site chain with birth rate 2*dim*lam."""
    if theta <= 0 or lam < 0:
        raise ValueError("need theta > 0 and lam >= 0")
    b = 2 * dim * lam
    D = 1 + theta + b * theta
    return b * theta / D, theta / D, 1 / D


def gap_threshold(nu, K):
    """M(K) = -log(4K^2)/log(1-nu): gaps longer than this have probability <= 1/(4K^2)."""
    if not (0 < nu < 1) or K < 1:
        raise ValueError("need 0 < nu < 1 and K >= 1")
    return -math.log(4 * K * K) / math.log1p(-nu)


def kill_rate_q(lam, dim=2):
    """Probability a given particle dies within time 1 with no birth onto it: (1-e^-1) e^(-2 dim lam)."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    return -math.expm1(-1.0) * math.exp(-2 * dim * lam)


def kill_per_try(lam, m, dim=1):
    """Probability that m particles all die within one unit of time and no births occur."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    return kill_rate_q(lam, dim) ** m


def rate_function(c):
    """Cramer rate of a mean-one exponential: gamma(c) = c - 1 - log c."""
    if c <= 0:
        raise ValueError("rate function needs c > 0")
    return c - 1.0 - math.log(c)


def c0(level=5.0):
    """The c in (0, 1) with exp(-gamma(c)) = 1/level."""
    if level <= 1:
        raise ValueError("level must exceed 1")
    target = math.log(level)
    return brentq(lambda c: rate_function(c) - target, 1e-300, 1.0, xtol=1e-15, rtol=1e-14)


@dataclass(frozen=True)
class ErlangTail:
    prob: float  # P(S_K <= t)
    c: float  # lam*t/K
    rate: float  # gamma(c) for c < 1, else 0
    ld_bound: float  # exp(-gamma(c) K), an upper bound when c < 1


def erlang_tail(K, lam, t) -> ErlangTail:
    """P(e_1 + ... + e_K <= t) for i.i.d. rate-lam exponentials, summed as a Poisson tail."""
    K = int(K)
    if K < 1 or lam <= 0 or t < 0:
        raise ValueError("need K >= 1, lam > 0 and t >= 0")
    x = lam * t
    if x == 0:
        prob = 0.0
    elif x < K:
        # P(Poisson(x) >= K), summed upward: terms decrease past j = K > x
        term = math.exp(-x + K * math.log(x) - math.lgamma(K + 1))
        prob = 0.0
        j = K
        while term > 1e-18 * max(prob, 1e-300):
            prob += term
            j += 1
            term *= x / j
    else:
        lo = 0.0
        term = math.exp(-x)
        for j in range(K):
            lo += term
            term *= x / (j + 1)
        prob = 1.0 - lo
    prob = min(max(prob, 0.0), 1.0)
    c = x / K
    rate = rate_function(c) if 0 < c < 1 else 0.0
    return ErlangTail(prob, c, rate, math.exp(-rate * K))


def _clip(p):
    return min(max(p, 0.0), 1.0)


@dataclass(frozen=True)
class PhaseBounds:
    """Numerical values of the displays in the d = 1 and d = 2 extinction arguments.

    Probabilities are clipped to [0, 1]; d = 2 fields are None in d = 1 and vice versa.
    """

    dim: int
    K: int
    T: float
    pi: tuple
    rho: float
    nu: float
    M_K: float | None
    gap_fail: float | None  # P(A_K) <= 2K (1-nu)^M(K) = 1/(2K)
    kill_try: float | None  # [(1-e^-1) e^(-2 lam)]^M(K)
    fail_phase2: float | None  # P(A_K) + 2K (1 - kill_try)^(beta/alpha)
    wall_success: float | None  # 1 - 2 exp(-2 K nu theta (t0+beta))
    closed_bound: float | None  # fail_phase2 + 1 - wall_success
    q_lam: float | None = None
    n_K: float | None = None
    r: float | None = None
    prob_AK: float | None = None
    csurv: float | None = None
    G2: float | None = None
    path_bound: float | None = None  # 16K 4^K P(S_K <= 2T)
    G3: float | None = None  # 16K (4/5)^K
    c0: float | None = None
    cond1_ok: bool | None = None  # 2T/K <= c0/lam

    def to_dict(self):
        return asdict(self)


def phase_bounds(K, t0, beta, alpha, lam, theta, dim=1, chi_hat=None, delta=0.05) -> PhaseBounds:
    """Evaluate the bounds for block scale K and T = (t0+beta)/alpha.

    ``chi_hat`` is the mean open-cluster size used in d = 2 (see percolation.cluster_stats).
    """
    if min(K, t0, beta, alpha, theta) <= 0 or lam < 0:
        raise ValueError("K, t0, beta, alpha, theta must be positive and lam nonnegative")
    if dim not in (1, 2):
        raise ValueError("bounds are available for d = 1 and d = 2")
    K = int(K)
    T = (t0 + beta) / alpha
    pi = pi_equilibrium(lam, theta, dim)
    rho = 1.0 / (1.0 + theta)
    if dim == 1:
        nu = 3 * pi[2] / 8
        M = gap_threshold(nu, K)
        gap = _clip(2 * K * (1 - nu) ** M)
        kt = kill_per_try(lam, M, 1)
        # (1 - kt)^(beta/alpha) computed in log space; kt can be tiny
        fail2 = _clip(gap + 2 * K * math.exp(beta / alpha * math.log1p(-kt)))
        wall = _clip(1 - 2 * math.exp(-2 * K * nu * theta * (t0 + beta)))
        return PhaseBounds(1, K, T, pi, rho, nu, M, gap, kt, fail2, wall,
                           _clip(fail2 + 1 - wall))
    if chi_hat is None or chi_hat < 1:
        raise ValueError("d = 2 bounds need chi_hat >= 1")
    nu = (1 - delta) ** 2 * pi[2]
    q = kill_rate_q(lam, 2)
    chi2 = chi_hat ** 2
    if K < 2:
        raise ValueError("d = 2 bounds need K >= 2 (log K > 0)")
    nK = 4 * (1 + delta) * chi2 * math.log(K)
    r = -4 * (1 + delta) * chi2 * math.log(q)
    pAK = _clip(16 * K * K * 2 * math.exp(-nK / (2 * chi2)))
    surv_term = math.exp(beta / alpha * math.log1p(-K ** (-r))) if r > 0 else 0.0
    cs = _clip(pAK + 16 * K * K * surv_term)
    cK = T / K
    g2_exp = cK * beta * K / (t0 + beta)
    g2 = _clip(pAK + 16 * K * K * math.exp(g2_exp * math.log1p(-K ** (-r)))) if r > 0 else pAK
    if lam > 0:
        tail = erlang_tail(K, lam, 2 * T).prob
        path = 16 * K * 4.0 ** K * tail if K < 500 else math.inf
    else:
        path = 0.0
    c = c0()
    return PhaseBounds(2, K, T, pi, rho, nu, None, None, None, None, None, None,
                       q_lam=q, n_K=nK, r=r, prob_AK=pAK, csurv=cs, G2=g2,
                       path_bound=_clip(path), G3=_clip(16 * K * 0.8 ** K), c0=c,
                       cond1_ok=bool(lam == 0 or 2 * T / K <= c / lam))


# ---------------------------------------------------------------------------
# Monte Carlo


def survival_prob(variant, model: ModelParams, box: Box, init: InitSpec, t_max, reps, seed,
                  jobs=None) -> EstimateCI:
    """Fraction of replicas with at least one 1 at t_max (Wilson interval)."""
    if t_max <= 0 or reps <= 0:
        raise ValueError("need t_max > 0 and reps > 0")
    if init.kind == "set" and not init.sites:
        return EstimateCI(0.0, 0.0, (0.0, 0.0), int(reps), int(seed))
    out = survival_runs(variant, model, box, init, t_max, reps, seed, jobs)
    return EstimateCI.proportion(int(out[:, 0].sum()), reps, seed)


@dataclass
class CriticalBracket:
    """Finite-size proxy bracket for the critical value (not an infinite-volume estimate)."""

    estimate: EstimateCI
    lo: float
    hi: float
    target: float
    t_max: float
    box_half: int
    variant: str
    evaluations: list = field(default_factory=list)  # (lam, survival fraction)
    monotone_ok: bool = True
    label: str = "finite-size proxy bracket"


def critical_bisect(alpha, theta, box: Box, t_max, target, tol, reps, seed, lo=0.5, hi=4.0,
                    variant="sterile", jobs=None) -> CriticalBracket:
    """Bisect lam for survival fraction = target from a single 1 at the origin.

    Every evaluation uses the same seed with lam_cap = hi, so the runs are
    common-random-number couplings, monotone in lam path by path.
    """
    if not (0 < target < 1) or tol <= 0 or not (0 <= lo < hi):
        raise ValueError("need 0 < target < 1, tol > 0 and 0 <= lo < hi")
    variant = ModelVariant.parse(variant)
    init = InitSpec("single-one-at-origin")
    base = ModelParams(lo, theta, alpha, box.dim, lam_cap=hi)

    def frac(lam):
        return survival_prob(variant, base.replace(lam=lam), box, init, t_max, reps, seed, jobs).value

    evals = []
    f_lo, f_hi = frac(lo), frac(hi)
    evals += [(lo, f_lo), (hi, f_hi)]
    if not (f_lo < target <= f_hi):
        raise ValueError(f"bracket [{lo}, {hi}] does not straddle target {target}: "
                         f"survival {f_lo:.4f} .. {f_hi:.4f}")
    a, b = lo, hi
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = frac(m)
        evals.append((m, fm))
        if fm < target:
            a = m
        else:
            b = m
    evals.sort()
    mono = all(evals[i][1] <= evals[i + 1][1] for i in range(len(evals) - 1))
    mid = 0.5 * (a + b)
    est = EstimateCI(mid, (b - a) / (2 * Z95), (a, b), int(reps), int(seed))
    half = (box.shape[0] - 1) // 2
    return CriticalBracket(est, a, b, target, float(t_max), half, variant.name.lower(), evals, mono)
