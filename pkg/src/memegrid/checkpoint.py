"""Bit-exact world snapshots: resume continues as if never interrupted."""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

from . import census as _census
from .config import GridConfig
from .world import WorldState

CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, world: WorldState, registry, key_log, events_arr) -> None:
    """Write the complete run state: world arrays, registry, per-step key
    log, and the replication-event history."""
    meta = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "config": world.config.to_dict(),
        "config_hash": world.config.identity_hash(),
        "step": world.step,
    }
    arrays = {"meta_json": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for name, arr in world.params.items():
        arrays[f"param__{name}"] = arr
    arrays.update(world.state_arrays())
    arrays.update(registry.to_arrays())
    arrays["key_log"] = key_log
    arrays["events"] = events_arr
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_checkpoint(path):
    """Returns (world, registry, key_log, events array).

    Truncated or foreign files fail cleanly; a config whose identity hash no
    longer matches the stored hash is refused with both hashes shown.
    """
    try:
        data = np.load(path)
    except (OSError, ValueError, zipfile.BadZipFile, EOFError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        with data:
            names = set(data.files)
            if "meta_json" not in names:
                raise CheckpointError(f"{path} is not a memegrid checkpoint")
            meta = json.loads(bytes(data["meta_json"]).decode())
            if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
                raise CheckpointError(
                    f"checkpoint version {meta.get('checkpoint_version')} "
                    f"unsupported (expected {CHECKPOINT_VERSION})"
                )
            config = GridConfig.from_dict(meta["config"])
            if config.identity_hash() != meta["config_hash"]:
                raise CheckpointError(
                    "config hash mismatch: stored config hashes to "
                    f"{config.identity_hash()} but checkpoint records "
                    f"{meta['config_hash']}"
                )
            params = {}
            for name in data.files:
                if name.startswith("param__"):
                    params[name[len("param__"):]] = data[name].copy()
            world = WorldState(
                config=config,
                params=params,
                h_g=data["h_g"].copy(),
                h_t=data["h_t"].copy(),
                buf_vals=data["buf_vals"].copy(),
                buf_src=data["buf_src"].copy(),
                buf_start=data["buf_start"].copy(),
                buf_size=data["buf_size"].copy(),
                counts=data["counts"].copy(),
                fit_mean=data["fit_mean"].copy(),
                fit_count=data["fit_count"].copy(),
                last_bcast=data["last_bcast"].copy(),
                step=int(meta["step"]),
            )
            registry = _census.MemeRegistry.from_arrays(
                {k: data[k] for k in data.files if k.startswith("reg_")}
            )
            key_log = data["key_log"].copy()
            events = data["events"].copy()
    except KeyError as exc:
        raise CheckpointError(f"checkpoint {path} is missing field {exc}") from exc
    except (ValueError, OSError, zipfile.BadZipFile, io.UnsupportedOperation) as exc:
        raise CheckpointError(f"checkpoint {path} is corrupt: {exc}") from exc
    return world, registry, key_log, events
