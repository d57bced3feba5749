"""Readers for the simulator's exported files.

This package only ever consumes exported artifacts (stats CSV, registry
JSONL, sweep CSV); it never recomputes simulation quantities.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class FigureSpec:
    run_dir: Path
    out_dir: Path
    window: int = 1000
    raster_threshold: int = 80
    meme_threshold: int = 8
    max_width: int = 2048

    @property
    def stats_path(self) -> Path:
        return self.run_dir / "stats.csv"

    @property
    def registry_path(self) -> Path:
        return self.run_dir / "registry.jsonl"

    @property
    def sweep_path(self) -> Path:
        return self.run_dir / "sweep.csv"


@dataclass
class Stats:
    step: np.ndarray
    max_pop: np.ndarray
    coverage: np.ndarray
    distinct: np.ndarray


def read_stats(path) -> Stats:
    rows = list(csv.DictReader(open(path, newline="", encoding="utf-8")))
    if not rows:
        raise ValueError(f"{path} has no data rows")
    return Stats(
        step=np.array([int(r["step"]) for r in rows]),
        max_pop=np.array([int(r["max_pop"]) for r in rows]),
        coverage=np.array([float(r["coverage"]) for r in rows]),
        distinct=np.array([int(r["distinct"]) for r in rows]),
    )


@dataclass
class RegistryEntry:
    key: int
    index: int
    first_seen: int
    peak: int
    series: dict[int, int] = field(default_factory=dict)


def read_registry(path) -> list[RegistryEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            entries.append(RegistryEntry(
                key=d["key"], index=d["index"], first_seen=d["first_seen"],
                peak=d["peak"],
                series={int(s): int(p) for s, p in d["series"].items()},
            ))
    if not entries:
        raise ValueError(f"{path} holds no memes")
    entries.sort(key=lambda e: e.index)
    return entries


@dataclass
class SweepRow:
    gamma_s: float
    gamma_f: float
    seed: int
    fitness: float
    n_memes: int


def read_sweep(path) -> list[SweepRow]:
    rows = list(csv.DictReader(open(path, newline="", encoding="utf-8")))
    if not rows:
        raise ValueError(f"{path} has no data rows")
    return [
        SweepRow(
            gamma_s=float(r["gamma_s"]),
            gamma_f=float(r["gamma_f"]),
            seed=int(r["seed"]),
            fitness=float(r["mean_final_fitness"]),
            n_memes=int(r["n_memes_ge_8"]),
        )
        for r in rows
    ]
