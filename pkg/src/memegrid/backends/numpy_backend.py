"""Pure-numpy step kernels, vectorized across agents.

Fallback used when the compiled extension is unavailable. Semantics match
the reference routines in ``neural``; randomness uses the same addressed
streams as the compiled kernel, so both backends consume identical random
words for identical (seed, step, agent) coordinates. The ``workers``
argument is accepted for interface parity and ignored: results never depend
on it.
"""

from __future__ import annotations

import numpy as np

from .. import rng as _rng

NAME = "python"

_NEG_INF = -np.inf


def _sigmoid(x):
    with np.errstate(over="ignore"):  # exp overflow saturates correctly
        return 1.0 / (1.0 + np.exp(-x))


def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _deliver(world, step):
    cfg = world.config
    a = cfg.grid_size
    k = cfg.neighborhood_size
    length, channels = cfg.msg_len, cfg.msg_channels
    cap = cfg.buffer_capacity
    ar = np.arange(a)

    z = _rng.gaussians(cfg.seed, _rng.P_DELIVER, ar, step, k * length * channels)
    noisy = world.last_bcast[world.nbr].astype(np.float64)
    noisy += cfg.noise_std * z.reshape(a, k, length, channels)

    start = world.buf_start.copy()
    size = world.buf_size.copy()
    for j in range(k):
        full = size >= cap
        pos = np.where(full, start, (start + size) % cap)
        world.buf_vals[ar, pos] = noisy[:, j]
        world.buf_src[ar, pos] = j
        start = np.where(full, (start + 1) % cap, start).astype(np.int32)
        size = np.where(full, size, size + 1).astype(np.int32)
    world.buf_start[:] = start
    world.buf_size[:] = size


def _attention_logits(world):
    """Saliency of every physical buffer slot (garbage where slot unused)."""
    cfg = world.config
    p = world.params
    a = cfg.grid_size
    c = cfg.msg_channels
    hg_lo, hg_hi = c, c + 16

    h_a = np.zeros((a, cfg.buffer_capacity, 10))
    # h_g contributes identically to every slot and position: fold it into
    # the bias once per step.
    pre_g = np.matmul(world.h_g[:, None, :], p["att_gate_w"][:, hg_lo:hg_hi]) \
        + p["att_gate_b"][:, None, :]
    pre_u = np.matmul(world.h_g[:, None, :], p["att_upd_w"][:, hg_lo:hg_hi]) \
        + p["att_upd_b"][:, None, :]
    wm_g, wh_g = p["att_gate_w"][:, :c], p["att_gate_w"][:, hg_hi:]
    wm_u, wh_u = p["att_upd_w"][:, :c], p["att_upd_w"][:, hg_hi:]
    for i in range(cfg.msg_len):
        m = world.buf_vals[:, :, i, :]
        g = _sigmoid(np.matmul(m, wm_g) + np.matmul(h_a, wh_g) + pre_g)
        u = np.matmul(m, wm_u) + np.matmul(h_a, wh_u) + pre_u
        h_a = g * h_a + (1.0 - g) * u
    return np.matmul(h_a, p["att_out_w"])[:, :, 0] + p["att_out_b"]


def _masked_softmax(z, any_valid):
    zmax = np.max(z, axis=1, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    e = np.exp(z - zmax)
    tot = e.sum(axis=1, keepdims=True)
    tot[~any_valid] = 1.0
    return e / tot


def _adaptive_softmax_masked(z, mask, h_star, rate, iters):
    z = np.where(mask, z, _NEG_INF)
    any_valid = mask.any(axis=1)
    for _ in range(iters):
        p = _masked_softmax(z, any_valid)
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p > 0, p * np.log(p), 0.0)
        h = -plogp.sum(axis=1)
        factor = 1.0 + rate * (h - h_star) / h_star
        z = z * factor[:, None]
    return _masked_softmax(z, any_valid)


def _generate(world, attended, h_g, step):
    cfg = world.config
    p = world.params
    a = cfg.grid_size
    length, c = cfg.msg_len, cfg.msg_channels

    h_m = np.zeros((a, 10))
    logits = np.empty((a, length, c))
    for i in range(length):
        x = np.concatenate(
            [attended[:, i], attended[:, length - 1 - i], h_g, h_m], axis=1
        )
        g = _sigmoid(np.matmul(x[:, None, :], p["gen_gate_w"])[:, 0] + p["gen_gate_b"])
        u = np.matmul(x[:, None, :], p["gen_upd_w"])[:, 0] + p["gen_upd_b"]
        h_m = g * h_m + (1.0 - g) * u
        logits[:, i] = np.matmul(h_m[:, None, :], p["gen_out_w"])[:, 0] + p["gen_out_b"]

    base = attended if cfg.skip_connection_on else 0.0
    p_plus = _sigmoid(cfg.beta * (base + logits))
    u01 = _rng.uniforms(cfg.seed, _rng.P_GEN, np.arange(a), step, length * c)
    return np.where(u01.reshape(a, length, c) < p_plus, 1, -1).astype(np.int8)


def exchange_step(world, step, do_deliver, workers=0):
    """Deliver -> attend -> update h_g -> broadcast, for the whole grid.

    Mutates buffers, h_g, counts and last_bcast in place; returns the
    selected neighbor slot per agent (-1 where the buffer was empty).
    """
    cfg = world.config
    a = cfg.grid_size
    cap = cfg.buffer_capacity
    ar = np.arange(a)

    if do_deliver:
        _deliver(world, step)

    size = world.buf_size
    has = size > 0
    if has.any():
        logits_phys = _attention_logits(world)
        j = np.arange(cap)
        phys = (world.buf_start[:, None] + j) % cap
        logits = np.take_along_axis(logits_phys, phys, axis=1)
        mask = j[None, :] < size[:, None]
        probs = _adaptive_softmax_masked(
            logits, mask, cfg.target_entropy, cfg.entropy_rate, cfg.softmax_iters
        )
        gum = _rng.gumbels(cfg.seed, _rng.P_ATTEND, ar, step, cap)
        with np.errstate(divide="ignore"):
            score = np.where(mask, np.log(probs) + gum, _NEG_INF)
        j_star = np.argmax(score, axis=1)
        phys_star = (world.buf_start + j_star) % cap
        attended = np.where(has[:, None, None], world.buf_vals[ar, phys_star], 0.0)
        sel = np.where(has, world.buf_src[ar, phys_star], -1).astype(np.int32)
    else:
        attended = np.zeros((a, cfg.msg_len, cfg.msg_channels))
        sel = np.full(a, -1, dtype=np.int32)

    x = np.concatenate([attended.reshape(a, -1), world.h_g], axis=1)
    h_g = np.tanh(
        world.h_g
        + np.matmul(x[:, None, :], world.params["glob_w"])[:, 0]
        + world.params["glob_b"]
    )
    world.h_g[:] = h_g

    world.last_bcast[:] = _generate(world, attended, h_g, step)

    world.counts *= 0.99
    chosen = sel >= 0
    world.counts[ar[chosen], sel[chosen]] += 1.0
    return sel


# --- surrogate task rollouts ----------------------------------------------

OMEGA = np.array([0.10, 0.15, 0.20, 0.25])


def surrogate_rollouts(world, step, workers=0):
    """One fixed-length built-in-walker rollout per agent.

    h_g stays frozen for the whole rollout; h_t restarts at zero and its
    final value is written back. Returns the best intermediate metric per
    agent (the episode fitness).
    """
    cfg = world.config
    p = world.params
    a = cfg.grid_size
    t_max = cfg.rollout_steps
    ar = np.arange(a)

    env_seed = _rng.philox4(cfg.seed, _rng.P_TASK_RESET, ar, step, 0, 0)[0]
    w = _rng.philox4(env_seed, _rng.P_ENV, 0, 0, 0, 0)
    phases = (2.0 * np.pi) * np.stack([_rng._to_u01(x) for x in w], axis=1)

    act_u = _rng.uniforms(cfg.seed, _rng.P_TASK_ACT, ar, step, 4 * t_max)

    v = np.zeros(a)
    pos = np.zeros(a)
    energy = np.zeros(a)
    best = np.full(a, _NEG_INF)
    h_g = world.h_g
    h_t = np.zeros((a, 16))
    obs = np.zeros((a, 24))
    obs[:, 0:4] = np.sin(phases)
    obs[:, 4:8] = np.cos(phases)

    for s in range(t_max):
        x = np.concatenate([h_g, h_t, obs], axis=1)
        h1 = _elu(np.matmul(x[:, None, :], p["task_in_w"])[:, 0] + p["task_in_b"])
        h2 = _elu(np.matmul(h1[:, None, :], p["task_hid_w"])[:, 0] + p["task_hid_b"])
        h_t = np.tanh(
            h_t + np.matmul(h2[:, None, :], p["task_state_w"])[:, 0] + p["task_state_b"]
        )
        logits = (
            np.matmul(h2[:, None, :], p["task_act_w"])[:, 0] + p["task_act_b"]
        ).reshape(a, 4, 20)
        e = np.exp(logits - logits.max(axis=2, keepdims=True))
        cdf = np.cumsum(e, axis=2)
        u = act_u[:, 4 * s:4 * s + 4, None] * cdf[:, :, -1:]
        actions = np.minimum((cdf <= u).sum(axis=2), 19)
        torque = actions / 19.0 * 2.0 - 1.0
        phases += OMEGA + 0.2 * torque
        v = 0.9 * v + 0.1 * (torque * np.sin(phases)).sum(axis=1) / 4.0
        pos += v
        energy += 0.005 * (torque**2).sum(axis=1)
        np.maximum(best, pos - energy, out=best)
        obs[:, 0:4] = np.sin(phases)
        obs[:, 4:8] = np.cos(phases)
        obs[:, 8] = v
        obs[:, 9] = pos / 400.0
        obs[:, 10:14] = torque

    world.h_t[:] = h_t
    return best
