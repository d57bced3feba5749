"""Backend benchmark: same workload on the compiled kernel and the numpy
fallback, with a summary consistency check between them.
"""

from __future__ import annotations

import time

import numpy as np

from .backends import available_backends, get_backend
from .config import GridConfig
from .world import init_world


def _time_backend(name, config, steps, workers):
    bk = get_backend(name)
    world = init_world(config)
    t0 = time.perf_counter()
    for t in range(steps):
        bk.exchange_step(world, t, do_deliver=(t > 0), workers=workers)
        if config.task_on:
            best = bk.surrogate_rollouts(world, t, workers=workers)
            world.fit_count += 1
            world.fit_mean += (best - world.fit_mean) / world.fit_count
    elapsed = time.perf_counter() - t0
    return elapsed, world


def run_benchmark(dims=(16, 16), steps=100, task=False, seed=7, workers=None):
    """Print steps/s per backend; returns {backend: seconds}."""
    config = GridConfig(rows=dims[0], cols=dims[1], steps=max(steps, 1),
                        task_on=task, seed=seed)
    config.validate()
    workers = workers or 1
    results = {}
    worlds = {}
    for name in available_backends():
        elapsed, world = _time_backend(name, config, steps, workers)
        results[name] = elapsed
        worlds[name] = world
        print(f"{name:>8}: {steps / elapsed:8.2f} steps/s "
              f"({elapsed:.2f} s for {steps} steps at {dims[0]}x{dims[1]}"
              f"{', task on' if task else ''})")
    if len(results) == 2:
        print(f"speedup: {results['python'] / results['cython']:.1f}x "
              f"(compiled over fallback)")
        a, b = worlds["cython"], worlds["python"]
        # Backends agree semantically; trajectories may diverge late through
        # FP reassociation at sampling boundaries, so compare coarsely.
        same = np.mean(a.last_bcast == b.last_bcast)
        print(f"final broadcast agreement: {same:.3f}")
    return results
