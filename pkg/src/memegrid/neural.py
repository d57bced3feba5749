"""Agent network mathematics, reference (per-agent) implementation.

These routines define the semantics; the batched backends must agree with
them. Sizes follow the message shape: attention and generator cells have
hidden size 10, the global state and task state have size 16.

Layer convention: a layer of shape (d_in, d_out) maps x -> x @ W + b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng

H_GLOBAL = 16
H_ATT = 10
H_GEN = 10
H_TASK = 16
OBS_DIM = 24
ACTION_CHANNELS = 4
ACTION_BINS = 20


def layer_shapes(msg_len, msg_channels, task_on):
    """Canonical (name, shape) list; also fixes the mutation flattening order."""
    c = msg_channels
    att_in = c + H_GLOBAL + H_ATT
    gen_in = 2 * c + H_GLOBAL + H_GEN
    flat = msg_len * c
    shapes = [
        ("att_gate_w", (att_in, H_ATT)),
        ("att_gate_b", (H_ATT,)),
        ("att_upd_w", (att_in, H_ATT)),
        ("att_upd_b", (H_ATT,)),
        ("att_out_w", (H_ATT, 1)),
        ("att_out_b", (1,)),
        ("glob_w", (flat + H_GLOBAL, H_GLOBAL)),
        ("glob_b", (H_GLOBAL,)),
        ("gen_gate_w", (gen_in, H_GEN)),
        ("gen_gate_b", (H_GEN,)),
        ("gen_upd_w", (gen_in, H_GEN)),
        ("gen_upd_b", (H_GEN,)),
        ("gen_out_w", (H_GEN, msg_channels)),
        ("gen_out_b", (msg_channels,)),
    ]
    if task_on:
        task_in = H_GLOBAL + H_TASK + OBS_DIM
        shapes += [
            ("task_in_w", (task_in, H_TASK)),
            ("task_in_b", (H_TASK,)),
            ("task_hid_w", (H_TASK, H_TASK)),
            ("task_hid_b", (H_TASK,)),
            ("task_state_w", (H_TASK, H_TASK)),
            ("task_state_b", (H_TASK,)),
            ("task_act_w", (H_TASK, ACTION_CHANNELS * ACTION_BINS)),
            ("task_act_b", (ACTION_CHANNELS * ACTION_BINS,)),
        ]
    return shapes


@dataclass
class Genome:
    """All evolvable parameters of one agent."""

    layers: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name):
        return self.layers[name]

    def flat_views(self):
        """Raveled views over every parameter, in canonical order."""
        return [a.reshape(-1) for a in self.layers.values()]

    def n_params(self):
        return sum(v.size for v in self.layers.values())

    def copy(self):
        return Genome({k: v.copy() for k, v in self.layers.items()})


def sigmoid(x):
    with np.errstate(over="ignore"):  # exp overflow saturates correctly
        return 1.0 / (1.0 + np.exp(-x))


def elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def orthogonal_init(rows, cols, gain, stream, block_offset=0):
    """gain-scaled orthogonal matrix from a deterministic gaussian draw.

    Orthonormal rows when rows <= cols, orthonormal columns otherwise; the
    QR sign fix makes the result unique for a given gaussian matrix.
    """
    n, m = (cols, rows) if rows <= cols else (rows, cols)
    a = stream.gaussians(n * m, block_offset).reshape(n, m)
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    q = q * d
    if rows <= cols:
        q = q.T
    return gain * q


def init_genome(config, agent_index) -> Genome:
    """Fresh genome: orthogonal weight matrices (gain 4), zero biases."""
    stream = _rng.RngStream(config.seed, _rng.P_INIT, entity=agent_index, step=0)
    layers = {}
    offset = 0
    for name, shape in layer_shapes(config.msg_len, config.msg_channels, config.task_on):
        if len(shape) == 1:
            layers[name] = np.zeros(shape, dtype=np.float64)
        else:
            layers[name] = np.ascontiguousarray(
                orthogonal_init(shape[0], shape[1], config.init_gain, stream, offset)
            )
            offset += -(-shape[0] * shape[1] // 4)  # blocks consumed
    return Genome(layers)


def gated_step(gate_w, gate_b, upd_w, upd_b, x, h):
    """h' = sigma(L_G(x)) * h + (1 - sigma(L_G(x))) * L_U(x), elementwise."""
    g = sigmoid(x @ gate_w + gate_b)
    u = x @ upd_w + upd_b
    return g * h + (1.0 - g) * u


def attention_logits(genome, h_g, memory):
    """One saliency logit per buffered message, independent of the others.

    ``memory`` is a sequence of (msg_len, msg_channels) float arrays in
    memory order (oldest first).
    """
    if len(memory) == 0:
        raise ValueError("attention over an empty memory is undefined")
    out = np.empty(len(memory), dtype=np.float64)
    for j, msg in enumerate(memory):
        h_a = np.zeros(H_ATT)
        for i in range(msg.shape[0]):
            x = np.concatenate([msg[i], h_g, h_a])
            h_a = gated_step(
                genome["att_gate_w"], genome["att_gate_b"],
                genome["att_upd_w"], genome["att_upd_b"], x, h_a,
            )
        out[j] = h_a @ genome["att_out_w"][:, 0] + genome["att_out_b"][0]
    return out


def softmax(z):
    e = np.exp(z - np.max(z))
    return e / e.sum()


def entropy_nats(p):
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def adaptive_softmax(logits, h_star, rate, iters):
    """Iteratively rescale logits so the softmax entropy approaches h_star.

    Each iteration multiplies the logits by 1 + rate*(H - H*)/H*: below
    target entropy the factor shrinks the logits (flattening the
    distribution), above target it sharpens them.
    """
    z = np.asarray(logits, dtype=np.float64).copy()
    for _ in range(iters):
        p = softmax(z)
        h = entropy_nats(p)
        z *= 1.0 + rate * (h - h_star) / h_star
    return softmax(z)


def sample_index(probs, gumbel_noise):
    """Gumbel-max draw: argmax of log p + g, identical to categorical sampling."""
    with np.errstate(divide="ignore"):
        scores = np.log(probs) + gumbel_noise
    return int(np.argmax(scores))


def update_global(genome, h_g, m_flat):
    x = np.concatenate([m_flat, h_g])
    return np.tanh(h_g + x @ genome["glob_w"] + genome["glob_b"])


def generate_message(genome, h_g, attended, skip_on, beta, symbol_uniforms):
    """Sample an outgoing message from the bidirectional generator cell.

    ``attended`` is the (possibly noisy, possibly all-zero) selected message;
    the skip term feeds it straight into the output probabilities. Returns an
    int8 matrix of +-1 symbols.
    """
    length, channels = attended.shape
    h_m = np.zeros(H_GEN)
    out = np.empty((length, channels), dtype=np.int8)
    for i in range(length):
        x = np.concatenate([attended[i], attended[length - 1 - i], h_g, h_m])
        h_m = gated_step(
            genome["gen_gate_w"], genome["gen_gate_b"],
            genome["gen_upd_w"], genome["gen_upd_b"], x, h_m,
        )
        logits = h_m @ genome["gen_out_w"] + genome["gen_out_b"]
        base = attended[i] if skip_on else 0.0
        p_plus = sigmoid(beta * (base + logits))
        u = symbol_uniforms[i]
        out[i] = np.where(u < p_plus, 1, -1)
    return out


def task_policy_step(genome, h_g, h_t, obs, action_uniforms):
    """One policy evaluation: sampled actions per channel and the next h_t."""
    x = np.concatenate([h_g, h_t, obs])
    h1 = elu(x @ genome["task_in_w"] + genome["task_in_b"])
    h2 = elu(h1 @ genome["task_hid_w"] + genome["task_hid_b"])
    h_t_next = np.tanh(h_t + h2 @ genome["task_state_w"] + genome["task_state_b"])
    logits = (h2 @ genome["task_act_w"] + genome["task_act_b"]).reshape(
        ACTION_CHANNELS, ACTION_BINS
    )
    actions = np.empty(ACTION_CHANNELS, dtype=np.int64)
    for j in range(ACTION_CHANNELS):
        e = np.exp(logits[j] - logits[j].max())
        cdf = np.cumsum(e / e.sum())
        actions[j] = min(int(np.searchsorted(cdf, action_uniforms[j], side="right")),
                         ACTION_BINS - 1)
    return actions, h_t_next


def mutate(genome, fraction, decay, std, stream) -> Genome:
    """Copy with a sparse random subset of parameters decayed and jittered.

    Selection and noise are addressed draws: parameter q uses uniform q and
    gaussian q of the stream, with gaussians starting after the uniform
    blocks, so unselected parameters stay bit-identical.
    """
    child = genome.copy()
    total = genome.n_params()
    if total == 0 or fraction == 0.0:
        return child
    u = stream.uniforms(total)
    z = stream.gaussians(total, block_offset=-(-total // 4))
    offset = 0
    for flat in child.flat_views():
        n = flat.size
        sel = u[offset:offset + n] < fraction
        flat[sel] = decay * flat[sel] + std * z[offset:offset + n][sel]
        offset += n
    return child
