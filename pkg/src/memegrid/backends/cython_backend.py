"""Thin wrapper dispatching world state into the compiled kernel."""

from __future__ import annotations

import numpy as np

from . import _ckernel

NAME = "cython"


def exchange_step(world, step, do_deliver, workers=1):
    cfg = world.config
    p = world.params
    sel = np.empty(cfg.grid_size, dtype=np.int32)
    _ckernel.exchange_step(
        p["att_gate_w"], p["att_gate_b"], p["att_upd_w"], p["att_upd_b"],
        p["att_out_w"], p["att_out_b"], p["glob_w"], p["glob_b"],
        p["gen_gate_w"], p["gen_gate_b"], p["gen_upd_w"], p["gen_upd_b"],
        p["gen_out_w"], p["gen_out_b"],
        world.h_g, world.buf_vals, world.buf_src, world.buf_start,
        world.buf_size, world.counts, world.last_bcast, world.nbr, sel,
        cfg.seed, step, bool(do_deliver), cfg.noise_std, cfg.target_entropy,
        cfg.entropy_rate, cfg.softmax_iters, cfg.beta,
        bool(cfg.skip_connection_on), int(workers),
    )
    return sel


def surrogate_rollouts(world, step, workers=1):
    cfg = world.config
    p = world.params
    best = np.empty(cfg.grid_size, dtype=np.float64)
    _ckernel.surrogate_rollouts(
        p["task_in_w"], p["task_in_b"], p["task_hid_w"], p["task_hid_b"],
        p["task_state_w"], p["task_state_b"], p["task_act_w"], p["task_act_b"],
        world.h_g, world.h_t, best,
        cfg.seed, step, cfg.rollout_steps, int(workers),
    )
    return best
