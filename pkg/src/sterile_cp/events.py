"""Graphical representation: model rates and materialized Poisson event streams."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _core
from .lattice import Box
from .rng import as_key

KIND_NAMES = ("death", "arrow", "arrival", "removal")


@dataclass(frozen=True)
class ModelParams:
    """Rates of the three-state model.

    lam    birth rate across each directed edge
    theta  removal multiplier (sterile marks vanish at rate theta*alpha)
    alpha  sterile arrival rate
    *_cap  optional dominating rates; points of a cap-rate stream are thinned
           down to the true rate, so runs that differ only in a rate share
           their randomness and are pathwise ordered
    """

    lam: float
    theta: float = 1.0
    alpha: float = 0.0
    dim: int = 1
    lam_cap: float | None = None
    alpha_cap: float | None = None
    removal_cap: float | None = None

    def __post_init__(self):
        for name in ("lam", "theta", "alpha"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative")
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        for name, base in (("lam_cap", self.lam), ("alpha_cap", self.alpha),
                           ("removal_cap", self.removal_rate)):
            cap = getattr(self, name)
            if cap is not None and not (math.isfinite(cap) and cap >= base - 1e-15):
                raise ValueError(f"{name} must be at least the rate it dominates")

    @property
    def removal_rate(self) -> float:
        return self.theta * self.alpha

    @property
    def rho(self) -> float:
        return 1.0 / (1.0 + self.theta)

    def rate_arrays(self):
        rates = np.array([1.0, self.lam, self.alpha, self.removal_rate])
        caps = np.array([
            1.0,
            self.lam if self.lam_cap is None else self.lam_cap,
            self.alpha if self.alpha_cap is None else self.alpha_cap,
            self.removal_rate if self.removal_cap is None else self.removal_cap,
        ])
        return rates, caps

    def replace(self, **kw) -> "ModelParams":
        d = dict(self.__dict__)
        d.update(kw)
        return ModelParams(**d)


@dataclass
class EventStream:
    """All events of one realization on ``box`` over [0, horizon], time-ordered.

    kind codes: 0 death, 1 arrow, 2 sterile arrival, 3 sterile removal.
    ``site`` is the affected site (arrow target); ``src`` is the arrow source,
    -1 for ghost arrows from an occupied boundary and for non-arrow events.
    """

    box: Box
    params: ModelParams
    horizon: float
    seed: int
    time: np.ndarray
    kind: np.ndarray
    site: np.ndarray
    src: np.ndarray

    def __len__(self):
        return int(self.time.shape[0])

    def arrays(self):
        return self.time, self.kind, self.site, self.src

    def _times(self, kind, site, src=None):
        m = (self.kind == kind) & (self.site == site)
        if src is not None:
            m &= self.src == src
        return self.time[m]

    def death_times(self, x):
        return self._times(0, self.box.index(x))

    def arrow_times(self, x, y):
        return self._times(1, self.box.index(y), self.box.index(x))

    def arrival_times(self, x):
        return self._times(2, self.box.index(x))

    def removal_times(self, x):
        return self._times(3, self.box.index(x))

    def counts(self) -> dict:
        return {name: int(np.sum(self.kind == k)) for k, name in enumerate(KIND_NAMES)}

    def window(self, t0: float, t1: float) -> np.ndarray:
        return events_in_window(self, t0, t1)

    def dump(self, path) -> None:
        """Write ``time,type,location`` lines (arrow location is ``src->dst``)."""
        with open(path, "w") as fh:
            fh.write("time,type,location\n")
            for t, k, s, r in zip(self.time, self.kind, self.site, self.src):
                loc = _fmt_site(self.box, s)
                if k == 1:
                    loc = ("ghost" if r < 0 else _fmt_site(self.box, r)) + "->" + loc
                fh.write(f"{t!r},{KIND_NAMES[k]},{loc}\n")


def _fmt_site(box, idx):
    return ":".join(str(v) for v in box.site(int(idx)))


EVENT_DTYPE = np.dtype([("time", "f8"), ("kind", "i1"), ("site", "i4"), ("src", "i4")])


def build_stream(params: ModelParams, box: Box, horizon: float, seed: int) -> EventStream:
    """Materialize every event stream of one realization on [0, horizon]."""
    if box.dim != params.dim:
        raise ValueError("box and model dimension differ")
    if not (math.isfinite(horizon) and horizon > 0):
        raise ValueError("horizon must be finite and positive")
    e_src, e_dst = box.edges
    rates, caps = params.rate_arrays()
    t, k, s, r = _core.generate(as_key(seed), box.n_sites, e_src, e_dst, rates, caps, float(horizon))
    return EventStream(box, params, float(horizon), int(seed), t, k, s, r)


def events_in_window(stream: EventStream, t0: float, t1: float) -> np.ndarray:
    """Time-ordered structured array of the events with t0 < time <= t1.

    Half-open windows make adjacent windows partition the stream; a window
    starting at 0 also includes a (measure-zero) event at time 0.
    """
    if not (0 <= t0 <= t1 <= stream.horizon):
        raise ValueError("window must satisfy 0 <= t0 <= t1 <= horizon")
    lo = np.searchsorted(stream.time, t0, side="right" if t0 > 0 else "left")
    hi = np.searchsorted(stream.time, t1, side="right")
    out = np.empty(hi - lo, dtype=EVENT_DTYPE)
    out["time"] = stream.time[lo:hi]
    out["kind"] = stream.kind[lo:hi]
    out["site"] = stream.site[lo:hi]
    out["src"] = stream.src[lo:hi]
    return out
