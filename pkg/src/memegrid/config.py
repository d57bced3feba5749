"""Run configuration: every tunable constant of the simulation in one place."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass


class ConfigError(ValueError):
    """Raised when a configuration cannot produce a well-defined run."""


FORMAT_VERSION = 1

# Fields that do not change the trajectory of the physics; excluded from the
# identity hash so a checkpoint can be resumed with a longer horizon.
_NON_IDENTITY_FIELDS = ("steps",)


@dataclass(frozen=True)
class GridConfig:
    rows: int = 16
    cols: int = 16
    msg_len: int = 10
    msg_channels: int = 3
    buffer_capacity: int = 100
    neighborhood_radius: int = 2
    noise_std: float = 0.1
    target_entropy: float = 0.6  # nats
    entropy_rate: float = 0.1
    softmax_iters: int = 20
    beta: float = 3.0
    promote_prob: float = 0.1
    n_top: int = 16
    mutation_fraction: float = 0.001
    weight_decay: float = 0.99
    mutation_std: float = 0.2
    # Orthogonal-init scale. Above ~3 the recurrent cells turn chaotic
    # (attention logits explode and perception noise swamps content
    # salience), which suppresses meme emergence entirely; 2.0 keeps the
    # entropy-targeted attention and the copy bias of the skip connection
    # both functional.
    init_gain: float = 2.0
    gamma_s: float = 0.0
    gamma_f: float = 1.0
    evolution_on: bool = True
    mutation_on: bool = True
    selection_on: bool = True
    homogeneous_init: bool = False
    skip_connection_on: bool = True
    task_on: bool = False
    rollout_steps: int = 400
    seed: int = 0
    steps: int = 2000

    # Derived helpers -----------------------------------------------------

    @property
    def grid_size(self) -> int:
        return self.rows * self.cols

    @property
    def neighborhood_size(self) -> int:
        r = self.neighborhood_radius
        return (2 * r + 1) ** 2 - 1

    @property
    def symbols_per_message(self) -> int:
        return self.msg_len * self.msg_channels

    def validate(self) -> "GridConfig":
        r = self.neighborhood_radius
        if r < 1:
            raise ConfigError(f"neighborhood_radius must be >= 1, got {r}")
        side = 2 * r + 1
        if self.rows < side or self.cols < side:
            raise ConfigError(
                f"grid {self.rows}x{self.cols} too small for radius {r} "
                f"(needs at least {side}x{side})"
            )
        if self.msg_len < 1 or self.msg_channels < 1:
            raise ConfigError("message shape entries must be positive")
        if self.symbols_per_message != 30:
            raise ConfigError(
                f"message must carry 30 symbols total, got "
                f"{self.msg_len}x{self.msg_channels}"
            )
        if self.buffer_capacity < self.neighborhood_size:
            raise ConfigError(
                "buffer_capacity must hold at least one neighborhood of "
                f"messages ({self.neighborhood_size})"
            )
        if self.buffer_capacity > 512:
            raise ConfigError("buffer_capacity above 512 is not supported")
        for name in ("promote_prob", "gamma_s", "gamma_f", "mutation_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.noise_std < 0 or self.mutation_std < 0:
            raise ConfigError("standard deviations must be non-negative")
        if self.target_entropy <= 0:
            raise ConfigError("target_entropy must be positive")
        if self.softmax_iters < 0:
            raise ConfigError("softmax_iters must be non-negative")
        if self.n_top < 1 or self.n_top > self.grid_size:
            raise ConfigError("n_top must lie in [1, grid size]")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.rollout_steps < 1:
            raise ConfigError("rollout_steps must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")
        return self

    def replace(self, **kw) -> "GridConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = {"format_version": FORMAT_VERSION}
        d.update(dataclasses.asdict(self))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        d = dict(d)
        version = d.pop("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise ConfigError(
                f"config format version {version} not supported "
                f"(expected {FORMAT_VERSION})"
            )
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def identity_hash(self) -> str:
        """Hash of everything that determines the trajectory (seed included)."""
        d = self.to_dict()
        for name in _NON_IDENTITY_FIELDS:
            d.pop(name, None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path) -> GridConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return GridConfig.from_dict(json.load(fh))


def save_config(config: GridConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
