"""memegrid: a deterministic grid simulator in which populations of small
recurrent neural agents exchange discrete messages, exert selection pressure
on each other's replication, and optionally evolve against a task fitness.
"""

from .config import ConfigError, GridConfig
from .grid import Site, neighborhood
from .harness import PRESETS, PROFILES, preset, replay, resume, run, sweep

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "GridConfig",
    "Site",
    "neighborhood",
    "PRESETS",
    "PROFILES",
    "preset",
    "run",
    "resume",
    "replay",
    "sweep",
    "__version__",
]
