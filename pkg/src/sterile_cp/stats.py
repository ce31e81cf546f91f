"""Point estimates with uncertainty."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.959963984540054


@dataclass(frozen=True)
class EstimateCI:
    value: float
    stderr: float
    ci95: tuple
    reps: int
    seed: int

    def __post_init__(self):
        lo, hi = self.ci95
        if not (lo <= self.value <= hi) and not math.isnan(self.value):
            raise ValueError("confidence interval must contain the estimate")

    @classmethod
    def proportion(cls, successes, reps, seed) -> "EstimateCI":
        """Binomial proportion with a Wilson score interval."""
        reps = int(reps)
        if reps <= 0:
            raise ValueError("need at least one replica")
        p = successes / reps
        lo, hi = wilson(successes, reps)
        return cls(p, math.sqrt(p * (1 - p) / reps), (min(lo, p), max(hi, p)), reps, int(seed))

    @classmethod
    def mean(cls, samples, seed) -> "EstimateCI":
        x = np.asarray(samples, dtype=float)
        n = x.size
        if n == 0:
            raise ValueError("need at least one sample")
        m = float(x.mean())
        se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
        if not math.isfinite(se):
            return cls(m, se, (-math.inf, math.inf), n, int(seed))
        return cls(m, se, (m - Z95 * se, m + Z95 * se), n, int(seed))

    @classmethod
    def normal(cls, value, stderr, reps, seed) -> "EstimateCI":
        return cls(float(value), float(stderr),
                   (value - Z95 * stderr, value + Z95 * stderr), int(reps), int(seed))

    def to_dict(self, name: str) -> dict:
        return {"name": name, "value": _f(self.value), "stderr": _f(self.stderr),
                "ci_lo": _f(self.ci95[0]), "ci_hi": _f(self.ci95[1]), "reps": self.reps}


def _f(v):
    v = float(v)
    return v if math.isfinite(v) else None


def wilson(successes, n, z=Z95):
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def linfit(x, y):
    """Least-squares line; returns slope, intercept, slope stderr and R^2."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 2:
        raise ValueError("need at least two points to fit")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ coef
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if x.size > 2:
        se = math.sqrt(ss_res / (x.size - 2) / float(np.sum((x - x.mean()) ** 2)))
    else:
        se = 0.0
    return float(coef[0]), float(coef[1]), se, r2
