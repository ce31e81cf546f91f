"""Command-line front end.

    sterile-cp <command> [--config FILE] [--seed S] [--reps N] [--out DIR] [--jobs J] [--set key=value ...]

Configuration is layered: command defaults < config file (YAML or JSON) <
STERILECP_<KEY> environment variables < --set / global flags.  Unknown keys in
a config file or --set are errors.  Each run writes result.json, config.json,
any CSV tables and manifest.json into the output directory.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .events import ModelParams
from .lattice import Box
from .parallel import set_default_jobs
from .process import INIT_KINDS, InitSpec
from .rng import grid_seed, split_key
from .stats import EstimateCI

ENV_PREFIX = "STERILECP_"
GLOBAL_KEYS = ("seed", "reps", "jobs", "out")
NOT_HASHED = ("jobs", "out")


class UsageError(Exception):
    """Bad invocation or configuration (exit status 2)."""


@dataclass
class Result:
    estimates: list = field(default_factory=list)  # (name, EstimateCI)
    details: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # file name -> (header, rows)
    extra_files: dict = field(default_factory=dict)  # file name -> writer(path)


@dataclass
class Command:
    name: str
    keys: dict  # key -> default
    handler: object
    help: str
    cost: object = None  # cfg -> replica budget units


COMMANDS: dict[str, Command] = {}

MODEL_KEYS = {"lam": 1.0, "theta": 1.0, "alpha": 0.0, "dim": 1,
              "lam_cap": None, "alpha_cap": None, "removal_cap": None}
BOX_KEYS = {"half": 10, "boundary": "vacant"}
BASE_KEYS = {"seed": 0, "reps": 100}


def command(name, keys, help, cost=None):
    def deco(fn):
        COMMANDS[name] = Command(name, {**BASE_KEYS, **keys}, fn, help, cost)
        return fn
    return deco


# ---------------------------------------------------------------------------
# config helpers


def _model(cfg) -> ModelParams:
    return ModelParams(float(cfg["lam"]), float(cfg["theta"]), float(cfg["alpha"]), int(cfg["dim"]),
                       cfg["lam_cap"], cfg["alpha_cap"], cfg["removal_cap"])


def _box(cfg) -> Box:
    return Box.cube(int(cfg["half"]), int(cfg["dim"]), cfg["boundary"])


def _sites(v, dim):
    if v is None:
        return ()
    out = []
    for s in v:
        s = tuple(int(c) for c in (s if isinstance(s, (list, tuple)) else [s]))
        if len(s) != dim:
            raise ValueError(f"site {s} does not have {dim} coordinates")
        out.append(s)
    return tuple(out)


def _init(cfg) -> InitSpec:
    kind = cfg["init"]
    if kind not in INIT_KINDS:
        raise ValueError(f"unknown initial law {kind!r}")
    kw = {}
    if cfg.get("init_probs") is not None:
        kw["probs"] = tuple(float(p) for p in cfg["init_probs"])
    if cfg.get("init_sites") is not None:
        kw["sites"] = _sites(cfg["init_sites"], int(cfg["dim"]))
    if kind in ("mu_rho", "nu_C"):
        kw["theta"] = float(cfg["theta"])
    return InitSpec(kind, **kw)


def _point(name, value):
    v = float(value)
    return name, EstimateCI(v, 0.0, (v, v), 0, 0)


def canonical(cfg) -> str:
    return json.dumps({k: v for k, v in cfg.items() if k not in NOT_HASHED},
                      sort_keys=True, separators=(",", ":"), default=str)


def config_hash(cfg) -> str:
    return hashlib.sha256(canonical(cfg).encode()).hexdigest()


def _parse_value(text):
    return yaml.safe_load(text)


def _check_keys(keys, allowed, where):
    bad = sorted(set(keys) - set(allowed))
    if bad:
        raise UsageError(f"unknown key(s) in {where}: {', '.join(bad)}")


def load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    text = p.read_text()
    data = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise UsageError("config file must hold a mapping")
    return data


def resolve_config(name, file_cfg=None, env=None, overrides=None) -> dict:
    """Defaults < file < environment < overrides, with unknown keys rejected."""
    cmd = COMMANDS[name]
    allowed = set(cmd.keys) | set(GLOBAL_KEYS)
    cfg = {k: v for k, v in cmd.keys.items()}
    file_cfg = dict(file_cfg or {})
    if "command" in file_cfg:
        if file_cfg.pop("command") != name:
            raise UsageError("config file names a different command")
    _check_keys(file_cfg, allowed, "config file")
    cfg.update(file_cfg)
    for k, v in (env if env is not None else os.environ).items():
        if k.startswith(ENV_PREFIX):
            key = k[len(ENV_PREFIX):].lower()
            if key in allowed:
                cfg[key] = _parse_value(v)
    overrides = dict(overrides or {})
    _check_keys(overrides, allowed, "command line")
    cfg.update(overrides)
    cfg.pop("out", None)
    cfg.pop("jobs", None)
    return cfg


# ---------------------------------------------------------------------------
# commands


@command("simulate", {**MODEL_KEYS, **BOX_KEYS, "variant": "sterile", "init": "all-one",
                      "init_probs": None, "init_sites": None, "t_max": 10.0, "samples": 11,
                      "dump_events": False},
         "replica survival and densities at t_max, plus one trajectory")
def _simulate(cfg, jobs):
    from .events import build_stream
    from .process import evolve, final_states
    params, box, init = _model(cfg), _box(cfg), _init(cfg)
    t_max, reps, seed = float(cfg["t_max"]), int(cfg["reps"]), int(cfg["seed"])
    finals = final_states(cfg["variant"], params, box, init, t_max, reps, seed, jobs)
    alive = (finals == 1).any(axis=1)
    res = Result()
    res.estimates.append(("survival", EstimateCI.proportion(int(alive.sum()), reps, seed)))
    for lvl, nm in ((1, "density_plus1"), (0, "density_zero"), (-1, "density_minus1")):
        res.estimates.append((nm, EstimateCI.mean((finals == lvl).mean(axis=1), seed)))
    # one realization on a materialized stream, recorded at evenly spaced times
    st_seed = split_key(seed, 0)
    stream = build_stream(params, box, t_max, st_seed)
    cfg0 = init.draw(box, st_seed)
    times = np.linspace(0.0, t_max, int(cfg["samples"]))
    tr = evolve(cfg["variant"], cfg0, stream, times)
    rows = [[f"{t:.10g}", *map(int, c)] for t, c in zip(tr.times, tr.counts)]
    res.tables["trajectory.csv"] = (["t", "count_plus1", "count_zero", "count_minus1"], rows)
    res.details["event_counts"] = stream.counts()
    if cfg["dump_events"]:
        res.extra_files["events.csv"] = stream.dump
    return res


@command("coupled", {**MODEL_KEYS, **BOX_KEYS, "t_max": 20.0, "samples": 40},
         "Remenik <= sterile <= contact order check on shared streams")
def _coupled(cfg, jobs):
    from .events import build_stream
    from .process import LatticeConfig, coupled_evolve
    params, box = _model(cfg), _box(cfg)
    reps, seed = int(cfg["reps"]), int(cfg["seed"])
    times = np.linspace(0, float(cfg["t_max"]), int(cfg["samples"]) + 1)[1:]
    start = LatticeConfig(box, np.ones(box.n_sites, np.int8))
    bad_runs = 0
    bad_checks = 0
    for r in range(reps):
        stream = build_stream(params, box, float(cfg["t_max"]), split_key(seed, r))
        _, rep = coupled_evolve([("remenik", start), ("sterile", start), ("contact", start)],
                                stream, times)
        n_bad = sum(not ok for v in rep.values() for ok in v)
        bad_checks += n_bad
        bad_runs += n_bad > 0
    res = Result([("violating_runs", EstimateCI.proportion(bad_runs, reps, seed))])
    res.details["violations"] = bad_checks
    res.details["checks"] = reps * 2 * len(times)
    return res


@command("duality-check", {**MODEL_KEYS, **BOX_KEYS, "A": [[0]], "C": [[0]], "D": [[1]], "t": 2.0},
         "both sides of the self-duality relation for Remenik's process",
         cost=lambda c: 2 * int(c["reps"]))
def _duality(cfg, jobs):
    from .duality import duality_check
    d = int(cfg["dim"])
    lhs, rhs, z = duality_check(_sites(cfg["A"], d), _sites(cfg["C"], d), _sites(cfg["D"], d),
                                float(cfg["t"]), _model(cfg), _box(cfg), int(cfg["reps"]),
                                int(cfg["seed"]), jobs)
    res = Result([("lhs", lhs), ("rhs", rhs)])
    res.details.update(lhs=lhs.value, rhs=rhs.value, z=z, reps=int(cfg["reps"]))
    return res


@command("crossings", {"p": 0.7, "N": 99, "eta": 0.5}, "four long-way crossings of Q1..Q4")
def _crossings(cfg, jobs):
    from .percolation import four_crossings_prob
    est = four_crossings_prob(float(cfg["p"]), int(cfg["N"]), float(cfg["eta"]), int(cfg["reps"]),
                              int(cfg["seed"]), jobs)
    return Result([("four_crossings", est)])


@command("cluster-tail", {"p": 0.3, "half": 30, "adjacency": "Z", "size_cap": 10 ** 6,
                          "min_count": 20},
         "origin-cluster size law and log-tail fit")
def _cluster(cfg, jobs):
    from .percolation import cluster_stats
    box = Box.cube(int(cfg["half"]), 2)
    cs = cluster_stats(float(cfg["p"]), box, cfg["adjacency"], int(cfg["reps"]), int(cfg["seed"]),
                       int(cfg["size_cap"]), int(cfg["min_count"]), jobs)
    res = Result([("chi", cs.chi), _point("tail_slope", cs.slope), _point("tail_r2", cs.r2)])
    res.details.update(gamma_hat=cs.gamma_hat, boundary_fraction=cs.boundary_fraction)
    res.tables["tail.csv"] = (["n", "prob"], [[int(n), f"{p:.10g}"] for n, p in zip(cs.tail_n, cs.tail_prob)])
    return res


@command("threshold", {"adjacency": "Z", "N": 64, "target": 0.5, "tol": 0.005, "lo": 0.0, "hi": 1.0},
         "finite-size crossing threshold by bisection",
         cost=lambda c: int(c["reps"]) * (math.ceil(math.log2((c["hi"] - c["lo"]) / c["tol"])) + 5))
def _threshold(cfg, jobs):
    from .percolation import threshold_bisect
    est = threshold_bisect(cfg["adjacency"], int(cfg["N"]), float(cfg["target"]), float(cfg["tol"]),
                           int(cfg["reps"]), int(cfg["seed"]), float(cfg["lo"]), float(cfg["hi"]), jobs)
    return Result([("p_hat", est)])


@command("solve-p0", {"lam": 1.0, "tol": 0.005, "half": 12, "p_hi": 0.55},
         "p with mean cluster size equal to chi*(lam)",
         cost=lambda c: int(c["reps"]) * (math.ceil(math.log2(c["p_hi"] / c["tol"])) + 5))
def _solve_p0(cfg, jobs):
    from .percolation import chi_star, solve_p0
    est = solve_p0(float(cfg["lam"]), float(cfg["tol"]), int(cfg["reps"]), int(cfg["seed"]),
                   int(cfg["half"]), float(cfg["p_hi"]), jobs)
    res = Result([("p0", est)])
    res.details["chi_star"] = chi_star(float(cfg["lam"]))
    return res


@command("edge-speed", {"lam": 2.0, "t_max": 200.0, "half": 300, "left_half": None, "lam_cap": None},
         "right-edge speed from a half line of 1's")
def _edge_speed(cfg, jobs):
    from .cptoolkit import edge_speed
    es = edge_speed(float(cfg["lam"]), float(cfg["t_max"]), int(cfg["half"]), int(cfg["reps"]),
                    int(cfg["seed"]), cfg["lam_cap"], cfg["left_half"], jobs)
    res = Result([("v", es.v)])
    res.details.update(n_alive=es.n_alive, n_extinct=es.n_extinct, n_wall=es.n_wall)
    return res


@command("edge-tail", {"lam": 2.0, "a": 0.3, "b": 1.2, "t_values": [10, 20, 40], "half": None},
         "large-deviation tails of the right edge")
def _edge_tail(cfg, jobs):
    from .cptoolkit import edge_tail
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        et = edge_tail(float(cfg["lam"]), float(cfg["a"]), float(cfg["b"]), cfg["t_values"],
                       int(cfg["reps"]), int(cfg["seed"]), cfg["half"], None, jobs)
    res = Result()
    for t, lo, hi in zip(et.t, et.p_low, et.p_high):
        res.estimates.append((f"p_low_t{t:g}", lo))
        res.estimates.append((f"p_high_t{t:g}", hi))
    res.details.update(gamma0=et.gamma0, gamma1=et.gamma1, r2_low=et.r2_low, r2_high=et.r2_high,
                       v_hat=et.v_hat, warnings=[str(x.message) for x in w])
    return res


@command("finite-survival", {"lam": 2.0, "sites": [0], "t_max": 50.0, "half": 50},
         "contact-process survival from a finite set")
def _finite(cfg, jobs):
    from .cptoolkit import finite_set_survival
    est = finite_set_survival(float(cfg["lam"]), cfg["sites"], float(cfg["t_max"]), int(cfg["reps"]),
                              int(cfg["seed"]), int(cfg["half"]), jobs)
    return Result([("survival", est)])


@command("eps-good", {"lam": 2.0, "epsilon": 0.1, "N": 20, "length": 60, "density": 1.0,
                      "config": None, "t_max": None, "horizon_factor": 2.0},
         "epsilon-good check of a 0/1 configuration on [0, length]")
def _eps_good(cfg, jobs):
    from .cptoolkit import epsilon_good
    if cfg["config"] is not None:
        conf = np.asarray(cfg["config"], np.int8)
    else:
        rng = np.random.default_rng(split_key(int(cfg["seed"]), 1))
        conf = (rng.random(int(cfg["length"]) + 1) < float(cfg["density"])).astype(np.int8)
    eg = epsilon_good(conf, float(cfg["epsilon"]), int(cfg["N"]), float(cfg["lam"]), int(cfg["reps"]),
                      int(cfg["seed"]), cfg["t_max"], float(cfg["horizon_factor"]), None, jobs)
    res = Result([("survival", eg.survival)])
    res.details.update(is_good=eg.is_good, t_max=eg.t_max)
    return res


@command("gamma-path", {"lam": 5.0, "L": 40, "delta": 0.1, "v": 3.9},
         "open paths through the parallelogram tube")
def _gamma(cfg, jobs):
    from .cptoolkit import parallelogram_open
    est = parallelogram_open(float(cfg["lam"]), int(cfg["L"]), float(cfg["delta"]), float(cfg["v"]),
                             int(cfg["reps"]), int(cfg["seed"]), None, jobs)
    return Result([("open_path", est)])


@command("block-d1", {**MODEL_KEYS, "lam": 2.0, "alpha": 0.01, "K": 20, "t0": 2.0, "beta": 0.5,
                      "boundary": "vacant"},
         "d = 1 good-block probability")
def _block_d1(cfg, jobs):
    from .renorm import BlockSpec, block_good_d1
    m = _model(cfg)
    est = block_good_d1(int(cfg["K"]), float(cfg["t0"]), float(cfg["beta"]), m, int(cfg["reps"]),
                        int(cfg["seed"]), cfg["boundary"], None, jobs)
    res = Result([("good", est)])
    res.details["block"] = BlockSpec.extinction(int(cfg["K"]), float(cfg["t0"]), float(cfg["beta"]), m).to_dict()
    return res


@command("block-d2", {**MODEL_KEYS, "dim": 2, "alpha": 0.02, "theta": 5.0, "K": None, "c_T": 0.04,
                      "c_K": 0.039, "boundary": "vacant"},
         "d = 2 good-block probability")
def _block_d2(cfg, jobs):
    from .renorm import block_good_d2
    m = _model(cfg)
    est = block_good_d2(cfg["K"], float(cfg["c_T"]), float(cfg["c_K"]), m, int(cfg["reps"]),
                        int(cfg["seed"]), cfg["boundary"], None, jobs)
    res = Result([("good", est)])
    T = float(cfg["c_T"]) / m.alpha
    K = cfg["K"] if cfg["K"] is not None else max(1, math.ceil(T / float(cfg["c_K"]) - 1e-9))
    res.details["block"] = {"kind": "d2-extinction", "K": int(K), "T": T, "c_T": cfg["c_T"],
                            "c_K": cfg["c_K"]}
    return res


@command("ne-open", {**MODEL_KEYS, "dim": 2, "theta": 9.0, "alpha": 0.01, "N": 99, "eta": 0.5,
                     "eps0": 0.02, "p0": 0.85, "seed_prob": 0.01},
         "NE-lattice site openness")
def _ne_open(cfg, jobs):
    from .renorm import ne_initial, ne_site_open
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        oe = ne_site_open(int(cfg["N"]), float(cfg["eta"]), float(cfg["eps0"]), _model(cfg),
                          ne_initial(float(cfg["p0"]), float(cfg["seed_prob"])), int(cfg["reps"]),
                          int(cfg["seed"]), jobs)
    res = Result([("open", oe.estimate)])
    res.details.update(block=oe.spec.to_dict(), warnings=list(oe.warnings))
    return res


@command("op-wet", {"p": 0.9, "n_levels": 100, "lattice": "1d-diagonal"},
         "oriented-percolation wet sets and edge speeds",
         cost=lambda c: int(c["reps"]) * max(1, int(c["n_levels"]) // 100))
def _op_wet(cfg, jobs):
    from .renorm import op_survival, oriented_percolation
    p, n, seed = float(cfg["p"]), int(cfg["n_levels"]), int(cfg["seed"])
    res = Result()
    if cfg["lattice"] == "1d-diagonal":
        surv, vr, vl = op_survival(p, n, int(cfg["reps"]), seed, jobs)
        res.estimates += [("survival", surv), ("v_right", vr), ("v_left", vl)]
    one = oriented_percolation(p, n, cfg["lattice"], seed)
    rows = []
    for w in one.levels:
        if cfg["lattice"] == "1d-diagonal":
            rows.append([w.level, len(w.sites), "" if w.empty else w.left, "" if w.empty else w.right])
        else:
            rows.append([w.level, len(w.sites), "", ""])
    res.tables["wet.csv"] = (["level", "n_wet", "left", "right"], rows)
    res.details.update(survived=one.survived, v_hat=one.v_hat)
    return res


@command("stc", {**MODEL_KEYS, "lam": 4.0, "theta": 5.0, "alpha": 0.01, "n": 3, "L": 20, "T": 100.0},
         "finite space-time condition events")
def _stc(cfg, jobs):
    from .renorm import space_time_condition
    p1, p2 = space_time_condition(int(cfg["n"]), int(cfg["L"]), float(cfg["T"]), _model(cfg),
                                  int(cfg["reps"]), int(cfg["seed"]), jobs)
    return Result([("P1", p1), ("P2", p2)])


@command("survival", {**MODEL_KEYS, **BOX_KEYS, "variant": "sterile", "init": "single-one-at-origin",
                      "init_probs": None, "init_sites": None, "t_max": 50.0},
         "horizon-truncated survival probability")
def _survival(cfg, jobs):
    from .estimators import survival_prob
    est = survival_prob(cfg["variant"], _model(cfg), _box(cfg), _init(cfg), float(cfg["t_max"]),
                        int(cfg["reps"]), int(cfg["seed"]), jobs)
    res = Result([("survival", est)])
    res.details.update(box_half=int(cfg["half"]), t_max=float(cfg["t_max"]))
    return res


@command("critical", {"alpha": 0.0, "theta": 1.0, "dim": 1, "half": 50, "t_max": 50.0,
                      "target": 0.3, "tol": 0.02, "lo": 0.5, "hi": 4.0, "variant": "sterile"},
         "finite-size proxy bracket for the critical birth rate",
         cost=lambda c: int(c["reps"]) * (math.ceil(math.log2((c["hi"] - c["lo"]) / c["tol"])) + 2))
def _critical(cfg, jobs):
    from .estimators import critical_bisect
    box = Box.cube(int(cfg["half"]), int(cfg["dim"]))
    br = critical_bisect(float(cfg["alpha"]), float(cfg["theta"]), box, float(cfg["t_max"]),
                         float(cfg["target"]), float(cfg["tol"]), int(cfg["reps"]), int(cfg["seed"]),
                         float(cfg["lo"]), float(cfg["hi"]), cfg["variant"], jobs)
    res = Result([("lambda_c_proxy", br.estimate)])
    res.details.update(label=br.label, lo=br.lo, hi=br.hi, monotone_ok=br.monotone_ok,
                       box_half=br.box_half, t_max=br.t_max)
    res.tables["evaluations.csv"] = (["lam", "survival"], [[f"{a:.10g}", f"{b:.10g}"] for a, b in br.evaluations])
    return res


@command("bounds", {"K": 20, "t0": 2.0, "beta": 0.5, "alpha": 0.01, "lam": 2.0, "theta": 1.0, "dim": 1,
                    "chi_hat": None, "delta": 0.05},
         "closed-form bounds of the extinction arguments", cost=lambda c: 0)
def _bounds(cfg, jobs):
    from .estimators import phase_bounds
    pb = phase_bounds(int(cfg["K"]), float(cfg["t0"]), float(cfg["beta"]), float(cfg["alpha"]),
                      float(cfg["lam"]), float(cfg["theta"]), int(cfg["dim"]), cfg["chi_hat"],
                      float(cfg["delta"]))
    res = Result()
    for k, v in pb.to_dict().items():
        if isinstance(v, float):
            res.estimates.append(_point(k, v))
    res.details["bounds"] = pb.to_dict()
    return res


@command("pi", {"lam": 1.0, "theta": 1.0, "dim": 2}, "equilibrium law of the comparison chain",
         cost=lambda c: 0)
def _pi(cfg, jobs):
    from .estimators import pi_equilibrium
    p = pi_equilibrium(float(cfg["lam"]), float(cfg["theta"]), int(cfg["dim"]))
    return Result([_point("pi_plus1", p[0]), _point("pi_zero", p[1]), _point("pi_minus1", p[2])])


# ---------------------------------------------------------------------------
# sweeps


def _sweep_points(grid):
    if not isinstance(grid, dict) or not grid:
        raise ValueError("grid must be a nonempty mapping of key -> list of values")
    keys = sorted(grid)
    vals = []
    for k in keys:
        v = grid[k]
        v = list(v) if isinstance(v, (list, tuple)) else [v]
        if not v:
            raise ValueError(f"grid axis {k!r} is empty")
        vals.append(v)
    return keys, [dict(zip(keys, combo)) for combo in itertools.product(*vals)]


def sweep_cost(target, cfg, points):
    cmd = COMMANDS[target]
    per = [(cmd.cost or (lambda c: int(c["reps"])))({**cfg, **pt}) for pt in points]
    return int(sum(per)), per


def run_sweep(cfg, jobs):
    """One CSV row per grid point; row seeds derive from (seed, index) unless coupled."""
    target = cfg["target"]
    if target not in COMMANDS or target == "sweep":
        raise UsageError(f"unknown sweep target {target!r}")
    inner_keys = COMMANDS[target].keys
    extra = {k: v for k, v in cfg.items() if k not in SWEEP_KEYS}
    _check_keys(extra, inner_keys, "sweep config")
    keys, points = _sweep_points(cfg["grid"])
    _check_keys(keys, inner_keys, "sweep grid")
    base = {**inner_keys, **extra, "seed": cfg["seed"], "reps": cfg["reps"]}
    total, per = sweep_cost(target, base, points)
    if cfg["budget"] is None or total > int(cfg["budget"]):
        report = {"error": {"type": "BudgetExceeded", "message": "sweep refused: cost exceeds budget"},
                  "cost_report": {"points": len(points), "per_point": per, "total": total,
                                  "budget": cfg["budget"]}}
        raise BudgetError(report)
    header = None
    rows = []
    for i, pt in enumerate(points):
        row_seed = int(cfg["seed"]) if cfg["coupled"] else grid_seed(int(cfg["seed"]), i)
        c = {**base, **pt, "seed": row_seed}
        r = COMMANDS[target].handler(c, jobs)
        cols = [(k, pt[k]) for k in keys] + [("seed", row_seed)]
        for name, e in r.estimates:
            d = e.to_dict(name)
            cols += [(name, d["value"]), (f"{name}_stderr", d["stderr"]), (f"{name}_ci_lo", d["ci_lo"]),
                     (f"{name}_ci_hi", d["ci_hi"]), (f"{name}_reps", d["reps"])]
        if header is None:
            header = [k for k, _ in cols]
        rows.append([_fmt(v) for _, v in cols])
    res = Result()
    res.tables["sweep.csv"] = (header, rows)
    res.details.update(target=target, points=len(points), cost=total, budget=cfg["budget"])
    return res


class BudgetError(Exception):
    def __init__(self, report):
        super().__init__(report["error"]["message"])
        self.report = report


SWEEP_KEYS = {"seed": 0, "reps": 100, "target": "survival", "grid": None, "budget": None,
              "coupled": False}
COMMANDS["sweep"] = Command("sweep", SWEEP_KEYS, run_sweep,
                            "grid sweep of any command over any parameter subset")


def resolve_sweep_config(file_cfg=None, env=None, overrides=None):
    """Sweep configs may carry any key of the target command."""
    merged = dict(file_cfg or {})
    merged.pop("command", None)
    target = (overrides or {}).get("target", merged.get("target", SWEEP_KEYS["target"]))
    allowed = set(SWEEP_KEYS) | set(GLOBAL_KEYS) | set(COMMANDS.get(target, COMMANDS["survival"]).keys)
    _check_keys(merged, allowed, "config file")
    _check_keys(overrides or {}, allowed, "command line")
    cfg = {**SWEEP_KEYS, **merged}
    for k, v in (env if env is not None else os.environ).items():
        if k.startswith(ENV_PREFIX) and k[len(ENV_PREFIX):].lower() in allowed:
            cfg[k[len(ENV_PREFIX):].lower()] = _parse_value(v)
    cfg.update(overrides or {})
    cfg.pop("out", None)
    cfg.pop("jobs", None)
    return cfg


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_outputs(out_dir: Path, name, cfg, res: Result, runtime):
    out_dir.mkdir(parents=True, exist_ok=True)
    h = config_hash(cfg)
    files = []
    for fname, (header, rows) in res.tables.items():
        with open(out_dir / fname, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        files.append(fname)
    for fname, writer in res.extra_files.items():
        writer(out_dir / fname)
        files.append(fname)
    (out_dir / "config.json").write_text(json.dumps(_jsonable(cfg), indent=2, sort_keys=True) + "\n")
    files.append("config.json")
    result = {"command": name, "config_hash": h, "seed": int(cfg["seed"]),
              "estimates": [_jsonable(e.to_dict(n)) for n, e in res.estimates],
              "details": _jsonable(res.details), "runtime_s": round(runtime, 6)}
    (out_dir / "result.json").write_text(json.dumps(result, indent=2) + "\n")
    files.append("result.json")
    manifest = {"config_hash": h, "seed": int(cfg["seed"]), "version": __version__,
                "runtime_s": round(runtime, 6), "files": sorted(files)}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return result


def run(name, cfg, out_dir, jobs=None):
    """Execute a resolved config and write its outputs; returns the result dict."""
    if name not in COMMANDS:
        raise UsageError(f"unknown command {name!r}")
    t = time.perf_counter()
    res = COMMANDS[name].handler(cfg, jobs)
    return write_outputs(Path(out_dir), name, cfg, res, time.perf_counter() - t)


# ---------------------------------------------------------------------------
# argument parsing


def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="YAML or JSON file of config keys")
    p.add_argument("--seed", type=int, default=d, help="base seed (unsigned 64-bit)")
    p.add_argument("--reps", type=int, default=d, help="replica count")
    p.add_argument("--out", default=d, help="output directory (default runs/<command>-<hash>)")
    p.add_argument("--jobs", type=int, default=d, help="worker threads (default: all cores)")
    p.add_argument("--set", action="append", default=d, metavar="KEY=VALUE",
                   help="override one config key (repeatable)")


def build_parser():
    p = argparse.ArgumentParser(prog="sterile-cp", description=__doc__.splitlines()[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    _global_flags(p, True)
    sub = p.add_subparsers(dest="command", metavar="command", required=True)
    for name, cmd in COMMANDS.items():
        sp = sub.add_parser(name, help=cmd.help, description=cmd.help + "\n\nkeys: " +
                            ", ".join(f"{k}={v!r}" for k, v in cmd.keys.items()),
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        _global_flags(sp, True)
    return p


def _error(kind, msg, name):
    print(json.dumps({"error": {"type": kind, "message": msg, "command": name}}))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    name = args.command
    over = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            parser.error(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        over[k.strip()] = _parse_value(v)
    for k in ("seed", "reps"):
        if hasattr(args, k):
            over[k] = getattr(args, k)
    try:
        file_cfg = load_config_file(args.config) if getattr(args, "config", None) else {}
        if name == "sweep":
            cfg = resolve_sweep_config(file_cfg, None, over)
        else:
            cfg = resolve_config(name, file_cfg, None, over)
    except (UsageError, yaml.YAMLError, json.JSONDecodeError) as e:
        print(f"sterile-cp: error: {e}", file=sys.stderr)
        return 2
    jobs = getattr(args, "jobs", None)
    if jobs is None and os.environ.get(ENV_PREFIX + "JOBS"):
        jobs = int(os.environ[ENV_PREFIX + "JOBS"])
    if jobs is not None:
        if jobs < 1:
            print("sterile-cp: error: --jobs must be positive", file=sys.stderr)
            return 2
        set_default_jobs(jobs)
    out = getattr(args, "out", None) or os.environ.get(ENV_PREFIX + "OUT") or \
        os.path.join("runs", f"{name}-{config_hash(cfg)[:12]}")
    try:
        result = run(name, cfg, out, jobs)
    except BudgetError as e:
        print(json.dumps(e.report))
        return 1
    except UsageError as e:
        print(f"sterile-cp: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, KeyError) as e:
        _error(type(e).__name__, str(e), name)
        return 1
    print(json.dumps({k: result[k] for k in ("command", "config_hash", "seed", "estimates")}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
