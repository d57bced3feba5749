"""Whole-grid simulation state as stacked per-agent arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import neural
from .config import GridConfig
from .grid import moore8_table, neighbor_table


@dataclass
class WorldState:
    """All mutable state of a run plus derived topology tables.

    Message buffers are per-agent rings: logical slot ``j`` (oldest first)
    lives at physical slot ``(buf_start + j) % capacity``. ``buf_src`` holds
    the neighbor slot index (0..k-1, relative to the receiver) a message
    arrived from.
    """

    config: GridConfig
    params: dict[str, np.ndarray]
    h_g: np.ndarray
    h_t: np.ndarray
    buf_vals: np.ndarray
    buf_src: np.ndarray
    buf_start: np.ndarray
    buf_size: np.ndarray
    counts: np.ndarray
    fit_mean: np.ndarray
    fit_count: np.ndarray
    last_bcast: np.ndarray
    step: int = 0
    nbr: np.ndarray = field(default=None, repr=False)
    moore8: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        dims = (self.config.rows, self.config.cols)
        if self.nbr is None:
            self.nbr = neighbor_table(dims, self.config.neighborhood_radius)
        if self.moore8 is None:
            self.moore8 = moore8_table(dims)

    def genome_view(self, agent) -> neural.Genome:
        """Per-agent genome of array views; writes hit the world arrays."""
        return neural.Genome({k: v[agent] for k, v in self.params.items()})

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {
            "h_g": self.h_g,
            "h_t": self.h_t,
            "buf_vals": self.buf_vals,
            "buf_src": self.buf_src,
            "buf_start": self.buf_start,
            "buf_size": self.buf_size,
            "counts": self.counts,
            "fit_mean": self.fit_mean,
            "fit_count": self.fit_count,
            "last_bcast": self.last_bcast,
        }


def init_world(config: GridConfig) -> WorldState:
    config.validate()
    a = config.grid_size
    length, channels = config.msg_len, config.msg_channels
    cap = config.buffer_capacity
    shapes = neural.layer_shapes(length, channels, config.task_on)

    params = {name: np.empty((a,) + shape, dtype=np.float64) for name, shape in shapes}
    if config.homogeneous_init:
        shared = neural.init_genome(config, 0)
        for name, _ in shapes:
            params[name][:] = shared[name]
    else:
        for i in range(a):
            g = neural.init_genome(config, i)
            for name, _ in shapes:
                params[name][i] = g[name]

    return WorldState(
        config=config,
        params=params,
        h_g=np.zeros((a, neural.H_GLOBAL)),
        h_t=np.zeros((a, neural.H_TASK)),
        buf_vals=np.zeros((a, cap, length, channels)),
        buf_src=np.full((a, cap), -1, dtype=np.int32),
        buf_start=np.zeros(a, dtype=np.int32),
        buf_size=np.zeros(a, dtype=np.int32),
        counts=np.zeros((a, config.neighborhood_size)),
        fit_mean=np.zeros(a),
        fit_count=np.zeros(a, dtype=np.int64),
        last_bcast=np.zeros((a, length, channels), dtype=np.int8),
        step=0,
    )


def reset_agent(world: WorldState, agent: int) -> None:
    """Newborn runtime: zero hidden state, empty memory, no history."""
    world.h_g[agent] = 0.0
    world.h_t[agent] = 0.0
    world.buf_vals[agent] = 0.0
    world.buf_src[agent] = -1
    world.buf_start[agent] = 0
    world.buf_size[agent] = 0
    world.counts[agent] = 0.0
    world.fit_mean[agent] = 0.0
    world.fit_count[agent] = 0
