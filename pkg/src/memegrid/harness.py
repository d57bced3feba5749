"""Experiment orchestration: ablation presets, the step pipeline, sweeps,
checkpointing, and output emission.
"""

from __future__ import annotations

import csv
import json
import os
import time
from pathlib import Path

import numpy as np

from . import census as _census
from . import evolution as _evolution
from . import rng as _rng
from . import task as _task
from .backends import get_backend
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, GridConfig, save_config
from .world import init_world

# Ablation flag matrix (mutation / homogeneous init / memetic selection),
# plus the two structural variants. Everything else inherits run defaults.
PRESETS = {
    "baseline": dict(mutation_on=True, homogeneous_init=False, selection_on=True),
    "no_evolution": dict(evolution_on=False, mutation_on=False,
                         homogeneous_init=False, selection_on=False),
    "no_variation": dict(mutation_on=False, homogeneous_init=True,
                         selection_on=False),
    "no_mutation": dict(mutation_on=False, homogeneous_init=False,
                        selection_on=True),
    "no_skip": dict(mutation_on=True, homogeneous_init=True, selection_on=True,
                    skip_connection_on=False),
    "no_selection_hom": dict(mutation_on=True, homogeneous_init=True,
                             selection_on=False),
    "no_selection_het": dict(mutation_on=True, homogeneous_init=False,
                             selection_on=False),
    "simplified": dict(mutation_on=True, homogeneous_init=False,
                       selection_on=True, msg_len=1, msg_channels=30),
}

PROFILES = {
    "ci": dict(rows=16, cols=16, steps=2000),
    "paper": dict(rows=32, cols=32, steps=10000),
}


def preset(name: str) -> dict:
    """Config deltas for a named ablation."""
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None


def apply_preset(config: GridConfig, name: str) -> GridConfig:
    return config.replace(**preset(name))


def resolve_workers(workers=None) -> int:
    if workers is None:
        env = os.environ.get("MEMEGRID_WORKERS")
        workers = int(env) if env else min(8, os.cpu_count() or 1)
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    return workers


def _external_rollouts(world, step, env_factory, env_cache):
    cfg = world.config
    seeds = _rng.philox4(cfg.seed, _rng.P_TASK_RESET,
                         np.arange(cfg.grid_size), step, 0, 0)[0]
    for agent in range(cfg.grid_size):
        env = env_cache.get(agent)
        if env is None:
            env = env_cache[agent] = env_factory(agent)
        stream = _rng.RngStream(cfg.seed, _rng.P_TASK_ACT, entity=agent, step=step)
        best = _task.rollout_fitness(
            world.genome_view(agent), world.h_g[agent], env,
            cfg.rollout_steps, stream, int(seeds[agent]),
        )
        if best is not None:
            world.fit_count[agent] += 1
            world.fit_mean[agent] += (best - world.fit_mean[agent]) / world.fit_count[agent]


def _run_loop(world, registry, key_log, events, *, backend=None, workers=None,
              env_factory=None, checkpoint_every=0, checkpoint_path=None,
              progress=None):
    bk = get_backend(backend)
    workers = resolve_workers(workers)
    cfg = world.config
    env_cache = {}
    try:
        for t in range(world.step, cfg.steps):
            bk.exchange_step(world, t, do_deliver=(t > 0), workers=workers)
            keys = _census.canonical_keys(world.last_bcast)
            key_log.append(keys)
            if cfg.task_on:
                if env_factory is None:
                    best = bk.surrogate_rollouts(world, t, workers=workers)
                    world.fit_count += 1
                    world.fit_mean += (best - world.fit_mean) / world.fit_count
                else:
                    _external_rollouts(world, t, env_factory, env_cache)
            if cfg.evolution_on:
                step_events = _evolution.promotion_step(world, t)
                if step_events:
                    _evolution.apply_replication(world, step_events, t)
                    events.extend(step_events)
            registry.update_from_keys(keys, t)
            world.step = t + 1
            if checkpoint_every and checkpoint_path and world.step % checkpoint_every == 0:
                _save(checkpoint_path, world, registry, key_log, events)
            if progress and world.step % progress == 0:
                print(f"step {world.step}/{cfg.steps} "
                      f"distinct={len(registry)}", flush=True)
    finally:
        for env in env_cache.values():
            env.close()
    return bk


def _save(path, world, registry, key_log, events):
    save_checkpoint(path, world, registry,
                    np.stack(key_log) if key_log else
                    np.zeros((0, world.config.grid_size), dtype=np.uint32),
                    _evolution.events_to_array(events))


def _write_events_csv(path, events, cols):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "promoter_row", "promoter_col", "promoted_row",
                    "promoted_col", "target_row", "target_col", "passed"])
        for ev in events:
            w.writerow([
                ev.step,
                ev.promoter // cols, ev.promoter % cols,
                ev.promoted // cols, ev.promoted % cols,
                ev.target // cols, ev.target % cols,
                int(ev.passed),
            ])


def _emit_outputs(out_dir, world, registry, key_log, events, *,
                  log_messages, write_checkpoint, backend_name, workers,
                  elapsed):
    cfg = world.config
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    summary = _census.summarize(registry, steps=world.step,
                                grid_size=cfg.grid_size)
    save_config(cfg, out / "config.json")
    _census.write_stats_csv(summary, out / "stats.csv")
    registry.dump_jsonl(out / "registry.jsonl")
    _census.write_pgm(_census.render_raster(registry, world.step, threshold=80),
                      out / "raster.pgm")
    _write_events_csv(out / "events.csv", events, cfg.cols)
    if log_messages and key_log:
        np.save(out / "message_log.npy", np.stack(key_log))
    if write_checkpoint:
        _save(out / "checkpoint.npz", world, registry, key_log, events)

    mean_fit = float(world.fit_mean.mean()) if cfg.task_on else None
    result = {
        "config_hash": cfg.identity_hash(),
        "steps": world.step,
        "grid_size": cfg.grid_size,
        "max_pop": int(summary.max_pop.max(initial=0)),
        "distinct_total": summary.distinct_total,
        "peak_counts": summary.peak_counts,
        "coverage_windows": summary.coverage_windows,
        "mean_final_fitness": mean_fit,
        "table1": summary.table1_line(),
    }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "run_info.json", "w", encoding="utf-8") as fh:
        json.dump({"backend": backend_name, "workers": workers,
                   "elapsed_s": elapsed}, fh, indent=2)
        fh.write("\n")
    return result


def run(config: GridConfig, out_dir, *, backend=None, workers=None,
        env_factory=None, log_messages=True, write_checkpoint=True,
        checkpoint_every=0, progress=None) -> dict:
    """Execute a full simulation and emit all output artifacts.

    Returns the summary dict (also written to ``summary.json``).
    """
    config.validate()
    t0 = time.perf_counter()
    world = init_world(config)
    registry = _census.MemeRegistry()
    key_log: list[np.ndarray] = []
    events: list[_evolution.ReplicationEvent] = []
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bk = _run_loop(
        world, registry, key_log, events, backend=backend, workers=workers,
        env_factory=env_factory, checkpoint_every=checkpoint_every,
        checkpoint_path=out / "checkpoint.npz", progress=progress,
    )
    return _emit_outputs(
        out, world, registry, key_log, events, log_messages=log_messages,
        write_checkpoint=write_checkpoint, backend_name=bk.NAME,
        workers=resolve_workers(workers), elapsed=time.perf_counter() - t0,
    )


def resume(checkpoint_path, out_dir, *, steps=None, backend=None, workers=None,
           env_factory=None, log_messages=True, write_checkpoint=True,
           checkpoint_every=0, progress=None) -> dict:
    """Continue a checkpointed run, optionally with a longer horizon.

    The continuation is bit-identical to an uninterrupted run of the same
    total length (on the same backend).
    """
    t0 = time.perf_counter()
    world, registry, key_log_arr, events_arr = load_checkpoint(checkpoint_path)
    if steps is not None:
        if steps < world.step:
            raise ConfigError(
                f"cannot resume to step {steps}: checkpoint is already at "
                f"step {world.step}"
            )
        world.config = world.config.replace(steps=steps)
    key_log = list(key_log_arr)
    events = _evolution.events_from_array(events_arr)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bk = _run_loop(
        world, registry, key_log, events, backend=backend, workers=workers,
        env_factory=env_factory, checkpoint_every=checkpoint_every,
        checkpoint_path=out / "checkpoint.npz", progress=progress,
    )
    return _emit_outputs(
        out, world, registry, key_log, events, log_messages=log_messages,
        write_checkpoint=write_checkpoint, backend_name=bk.NAME,
        workers=resolve_workers(workers), elapsed=time.perf_counter() - t0,
    )


def replay(log_path, out_dir) -> dict:
    """Recompute the census pipeline from a recorded message log."""
    keys = np.load(log_path)
    if keys.ndim != 2:
        raise ConfigError(f"message log must be (steps, agents), got {keys.shape}")
    steps, grid_size = keys.shape
    registry = _census.MemeRegistry()
    for t in range(steps):
        registry.update_from_keys(keys[t], t)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = _census.summarize(registry, steps=steps, grid_size=grid_size)
    _census.write_stats_csv(summary, out / "stats.csv")
    registry.dump_jsonl(out / "registry.jsonl")
    _census.write_pgm(_census.render_raster(registry, steps, threshold=80),
                      out / "raster.pgm")
    result = {
        "steps": steps,
        "grid_size": grid_size,
        "max_pop": int(summary.max_pop.max(initial=0)),
        "distinct_total": summary.distinct_total,
        "peak_counts": summary.peak_counts,
        "table1": summary.table1_line(),
    }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result


# --- gamma sweeps -----------------------------------------------------------

def sweep_config(gamma_s, gamma_f, seed, *, rows=16, cols=16, steps=1000) -> GridConfig:
    """One cell of the selection-strength sweep (task on, faster promotion)."""
    return GridConfig(
        rows=rows, cols=cols, steps=steps, task_on=True, promote_prob=0.2,
        gamma_s=gamma_s, gamma_f=gamma_f, seed=seed,
    )


def _sweep_cell(args):
    cfg, out_dir, backend, workers = args
    summary = run(cfg, out_dir, backend=backend, workers=workers,
                  log_messages=False, write_checkpoint=False)
    return {
        "gamma_s": cfg.gamma_s,
        "gamma_f": cfg.gamma_f,
        "seed": cfg.seed,
        "mean_final_fitness": summary["mean_final_fitness"],
        "n_memes_ge_8": summary["peak_counts"]["ge_8"],
    }


def sweep(gamma_s_values, gamma_f_values, seeds, out_dir, *, rows=16, cols=16,
          steps=1000, backend=None, workers=None, jobs=1, progress=False) -> list[dict]:
    """One run per (gamma_s, gamma_f, seed); returns and writes the table."""
    if not gamma_s_values or not gamma_f_values or not seeds:
        raise ConfigError("sweep value lists must be non-empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = []
    for gs in gamma_s_values:
        for gf in gamma_f_values:
            for seed in seeds:
                cfg = sweep_config(gs, gf, seed, rows=rows, cols=cols, steps=steps)
                cell_dir = out / "cells" / f"gs{gs}_gf{gf}_seed{seed}"
                cells.append((cfg, cell_dir, backend, workers))

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows_out = list(pool.map(_sweep_cell, cells))
    else:
        rows_out = []
        for i, cell in enumerate(cells):
            rows_out.append(_sweep_cell(cell))
            if progress:
                print(f"sweep cell {i + 1}/{len(cells)} done", flush=True)

    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma_s", "gamma_f", "seed", "mean_final_fitness",
                    "n_memes_ge_8"])
        for row in rows_out:
            w.writerow([
                repr(float(row["gamma_s"])), repr(float(row["gamma_f"])),
                row["seed"], repr(float(row["mean_final_fitness"])),
                row["n_memes_ge_8"],
            ])
    return rows_out
