"""Replica pool.

Replica r of a run always uses the key derived from (seed, r) and writes into
slot r of the output, so results do not depend on the number of workers.
Kernels release the GIL, so a thread pool is enough.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 32
_default_jobs = 1


def set_default_jobs(jobs: int | None) -> None:
    global _default_jobs
    _default_jobs = max(1, int(jobs)) if jobs else max(1, os.cpu_count() or 1)


def default_jobs() -> int:
    return _default_jobs


def run_replicas(kernel, reps, out, args, jobs=None):
    """Call ``kernel(r0, r1, out[r0:r1], *args)`` over chunks of replicas."""
    jobs = jobs or _default_jobs
    bounds = [(r0, min(reps, r0 + CHUNK)) for r0 in range(0, reps, CHUNK)]

    def task(b):
        kernel(b[0], b[1], out[b[0]:b[1]], *args)

    if jobs <= 1 or len(bounds) == 1:
        for b in bounds:
            task(b)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            list(ex.map(task, bounds))
    return out


def alloc(reps, shape=(), dtype=np.float64):
    return np.zeros((reps,) + tuple(shape), dtype=dtype)
