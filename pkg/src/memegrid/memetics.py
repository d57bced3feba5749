"""Per-step message exchange, reference (single-agent) implementation.

The grid backends fuse this pipeline across all agents; these routines
define its semantics for one agent and serve as the independent oracle in
the test suite. ``grid_step`` dispatches to the active backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import neural
from .backends import get_backend


@dataclass
class BufferEntry:
    values: np.ndarray  # (msg_len, msg_channels) float, noise included
    source: int  # neighbor slot of the receiver


@dataclass
class MessageBuffer:
    """FIFO of noisy messages; insertion beyond capacity evicts the oldest."""

    capacity: int = 100
    entries: list[BufferEntry] = field(default_factory=list)

    def push(self, values, source):
        if len(self.entries) >= self.capacity:
            self.entries.pop(0)
        self.entries.append(BufferEntry(np.asarray(values, dtype=np.float64), source))

    def __len__(self):
        return len(self.entries)


def deliver(buffer: MessageBuffer, broadcasts, noise_std, noise) -> None:
    """Push one neighborhood round of broadcasts with perception noise.

    ``broadcasts`` is the per-slot list of +-1 messages in neighbor-slot
    order; ``noise`` supplies slot-major gaussian values, one per symbol.
    """
    noise = np.asarray(noise, dtype=np.float64).reshape(len(broadcasts), -1)
    for slot, msg in enumerate(broadcasts):
        msg = np.asarray(msg, dtype=np.float64)
        buffer.push(msg + noise_std * noise[slot].reshape(msg.shape), slot)


def agent_step(genome, h_g, buffer: MessageBuffer, config, attend_gumbels,
               symbol_uniforms):
    """One exchange step for a single agent.

    Returns (outgoing message, selected neighbor slot or -1, new h_g).
    With an empty buffer (step 0 of a run) the attended input is the zero
    matrix and no selection happens. Selection-count bookkeeping is the
    caller's job: decay all counts by 0.99, then add 1 to the returned slot.
    """
    shape = (config.msg_len, config.msg_channels)
    if len(buffer) == 0:
        attended = np.zeros(shape)
        selected = -1
    else:
        logits = neural.attention_logits(
            genome, h_g, [e.values for e in buffer.entries]
        )
        probs = neural.adaptive_softmax(
            logits, config.target_entropy, config.entropy_rate,
            config.softmax_iters,
        )
        idx = neural.sample_index(probs, np.asarray(attend_gumbels)[: len(buffer)])
        attended = buffer.entries[idx].values
        selected = buffer.entries[idx].source
    h_g_next = neural.update_global(genome, h_g, attended.reshape(-1))
    outgoing = neural.generate_message(
        genome, h_g_next, attended, config.skip_connection_on, config.beta,
        np.asarray(symbol_uniforms).reshape(shape),
    )
    return outgoing, selected, h_g_next


def grid_step(world, step, *, backend=None, workers=1):
    """Advance the whole grid one exchange step (two-phase, deterministic)."""
    bk = get_backend(backend)
    return bk.exchange_step(world, step, do_deliver=(step > 0), workers=workers)
