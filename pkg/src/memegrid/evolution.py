"""Promotion-weighted, fitness-gated replication with mutation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neural
from . import rng as _rng
from .world import WorldState, reset_agent

EVENT_FIELDS = ("step", "promoter", "promoted", "target", "passed")


@dataclass(frozen=True)
class ReplicationEvent:
    step: int
    promoter: int  # flat site indices
    promoted: int
    target: int
    passed: bool


def _uniform_slot(u, k):
    return min(int(u * k), k - 1)


def top_set(fit_mean: np.ndarray, n_top: int) -> np.ndarray:
    """Boolean mask of the n_top best lifetime means, ties to lower site index."""
    order = np.argsort(-fit_mean, kind="stable")
    mask = np.zeros(fit_mean.shape[0], dtype=bool)
    mask[order[:n_top]] = True
    return mask


def fitness_gate(u_gate: float, promoted: int, config, top_mask) -> bool:
    """Pass if the gate is waived (gamma_f) or the agent ranks in the top N.

    Without a task there is no fitness signal and the gate always passes.
    """
    if not config.task_on:
        return True
    if u_gate < config.gamma_f:
        return True
    return bool(top_mask[promoted])


def promotion_step(world: WorldState, step: int) -> list[ReplicationEvent]:
    """Independent per-agent promotion draws for one step.

    Each agent promotes with probability promote_prob; the promotee comes
    from its neighborhood, weighted by accumulated selection counts unless
    memetic selection is disabled or the gamma_s coin says uniform. The
    fixed draw layout (one block of four uniforms plus one extra word per
    agent) keeps results independent of which branches trigger.
    """
    cfg = world.config
    a = cfg.grid_size
    k = cfg.neighborhood_size
    u = _rng.uniforms(cfg.seed, _rng.P_PROMOTE, np.arange(a), step, 5)
    eff_gamma_s = 1.0 if not cfg.selection_on else cfg.gamma_s
    top_mask = top_set(world.fit_mean, cfg.n_top) if cfg.task_on else None

    events = []
    for agent in np.nonzero(u[:, 0] < cfg.promote_prob)[0]:
        if u[agent, 1] < eff_gamma_s:
            slot = _uniform_slot(u[agent, 2], k)
        else:
            weights = world.counts[agent]
            total = weights.sum()
            if total <= 0.0:
                slot = _uniform_slot(u[agent, 2], k)
            else:
                cdf = np.cumsum(weights)
                slot = min(int(np.searchsorted(cdf, u[agent, 2] * total, side="right")),
                           k - 1)
        promoted = int(world.nbr[agent, slot])
        passed = fitness_gate(u[agent, 3], promoted, cfg, top_mask)
        target = int(world.moore8[promoted, _uniform_slot(u[agent, 4], 8)])
        events.append(ReplicationEvent(step, int(agent), promoted, target, passed))
    return events


def apply_replication(world: WorldState, events, step: int) -> None:
    """Copy promoted genomes (with mutation) over their targets.

    Promoted genomes are read from the pre-replication snapshot, so every
    offspring this step descends from a genome that existed at the step's
    start; writes land in promoter order, last writer wins. Each overwritten
    site's runtime resets and its broadcast slot is replaced by a message
    generated from zero state, which is what neighbors will receive on the
    next delivery.

    Implementation is batched across events but draw-for-draw identical to
    applying ``neural.mutate`` per event: mutation draws are addressed by
    promoter, so skipping events that a later event overwrites changes
    nothing.
    """
    cfg = world.config
    applied = [ev for ev in events if ev.passed]
    if not applied:
        return

    # last (promoter-order) event per target wins; earlier ones are inert
    final_by_target = {ev.target: ev for ev in applied}
    finals = [final_by_target[t] for t in sorted(final_by_target)]
    promoters = np.array([ev.promoter for ev in finals], dtype=np.int64)
    parents = np.array([ev.promoted for ev in finals], dtype=np.int64)
    targets = np.array([ev.target for ev in finals], dtype=np.int64)

    flat = np.concatenate(
        [world.params[name][parents].reshape(len(finals), -1)
         for name in world.params], axis=1,
    )
    if cfg.mutation_on and cfg.mutation_fraction > 0.0:
        total = flat.shape[1]
        u = _rng.uniforms(cfg.seed, _rng.P_MUTATE, promoters, step, total)
        z = _rng.gaussians(cfg.seed, _rng.P_MUTATE, promoters, step, total,
                           block_offset=-(-total // 4))
        sel = u < cfg.mutation_fraction
        flat[sel] = cfg.weight_decay * flat[sel] + cfg.mutation_std * z[sel]

    offset = 0
    for name, arr in world.params.items():
        size = arr[0].size
        arr[targets] = flat[:, offset:offset + size].reshape(
            (len(finals),) + arr.shape[1:])
        offset += size
    for t in targets:
        reset_agent(world, int(t))

    world.last_bcast[targets] = _birth_broadcasts(world, targets, step)


def _birth_broadcasts(world: WorldState, targets, step: int) -> np.ndarray:
    """Newborn bootstrap messages: generated from zero hidden state and zero
    attended input, batched over targets; matches neural.generate_message
    with the per-target BIRTH stream."""
    cfg = world.config
    p = world.params
    n = len(targets)
    length, channels = cfg.msg_len, cfg.msg_channels
    h_m = np.zeros((n, neural.H_GEN))
    zeros_x = np.zeros((n, 2 * channels + neural.H_GLOBAL))
    logits = np.empty((n, length, channels))
    for i in range(length):
        x = np.concatenate([zeros_x, h_m], axis=1)
        g = 1.0 / (1.0 + np.exp(-(
            np.matmul(x[:, None, :], p["gen_gate_w"][targets])[:, 0]
            + p["gen_gate_b"][targets])))
        upd = np.matmul(x[:, None, :], p["gen_upd_w"][targets])[:, 0] \
            + p["gen_upd_b"][targets]
        h_m = g * h_m + (1.0 - g) * upd
        logits[:, i] = np.matmul(h_m[:, None, :], p["gen_out_w"][targets])[:, 0] \
            + p["gen_out_b"][targets]
    p_plus = 1.0 / (1.0 + np.exp(-cfg.beta * logits))
    u = _rng.uniforms(cfg.seed, _rng.P_BIRTH, np.asarray(targets), step,
                      length * channels).reshape(n, length, channels)
    return np.where(u < p_plus, 1, -1).astype(np.int8)


def events_to_array(events) -> np.ndarray:
    out = np.zeros((len(events), 5), dtype=np.int64)
    for i, ev in enumerate(events):
        out[i] = (ev.step, ev.promoter, ev.promoted, ev.target, int(ev.passed))
    return out


def events_from_array(arr) -> list[ReplicationEvent]:
    return [
        ReplicationEvent(int(s), int(a), int(p), int(t), bool(g))
        for s, a, p, t, g in arr
    ]
