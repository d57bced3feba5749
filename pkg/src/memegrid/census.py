"""Meme accounting: canonical message identity, population registry,
per-step statistics, and the appearance-ordered dominance raster.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

SYMBOLS = 30


def canonical_keys(broadcasts: np.ndarray) -> np.ndarray:
    """30-bit keys for a stack of +-1 messages (row-major, +1 -> bit set).

    Bit ``i*channels + c`` is the least-significant-first encoding of symbol
    (i, c); all -1 maps to 0 and all +1 to 2**30 - 1.
    """
    flat = broadcasts.reshape(broadcasts.shape[0], -1)
    bits = (flat > 0).astype(np.uint32)
    weights = np.uint32(1) << np.arange(SYMBOLS, dtype=np.uint32)
    return (bits * weights).sum(axis=1, dtype=np.uint32)


def canonical_key(message: np.ndarray) -> int:
    return int(canonical_keys(message[None])[0])


def take_census(keys: np.ndarray) -> dict[int, int]:
    """Population per distinct key among this step's broadcasts."""
    uniq, counts = np.unique(keys, return_counts=True)
    return {int(k): int(n) for k, n in zip(uniq, counts)}


@dataclass
class MemeRecord:
    index: int
    first_seen: int
    peak: int = 0
    series: dict[int, int] = field(default_factory=dict)  # step -> population


class MemeRegistry:
    """Append-only index of distinct messages by first appearance."""

    def __init__(self):
        self.records: dict[int, MemeRecord] = {}
        self.last_step: int = -1

    def __len__(self):
        return len(self.records)

    def update(self, census: dict[int, int], step: int) -> None:
        for key in sorted(census):
            pop = census[key]
            rec = self.records.get(key)
            if rec is None:
                rec = MemeRecord(index=len(self.records), first_seen=step)
                self.records[key] = rec
            rec.series[step] = pop
            if pop > rec.peak:
                rec.peak = pop
        self.last_step = max(self.last_step, step)

    def update_from_keys(self, keys: np.ndarray, step: int) -> None:
        self.update(take_census(keys), step)

    # Serialization (checkpoints and the registry dump) --------------------

    def to_arrays(self):
        keys = np.fromiter(self.records.keys(), dtype=np.uint32, count=len(self.records))
        order = np.argsort([self.records[int(k)].index for k in keys])
        keys = keys[order]
        first = np.array([self.records[int(k)].first_seen for k in keys], dtype=np.int64)
        ser_idx, ser_step, ser_pop = [], [], []
        for i, k in enumerate(keys):
            for s in sorted(self.records[int(k)].series):
                ser_idx.append(i)
                ser_step.append(s)
                ser_pop.append(self.records[int(k)].series[s])
        return {
            "reg_keys": keys,
            "reg_first": first,
            "reg_ser_idx": np.array(ser_idx, dtype=np.int64),
            "reg_ser_step": np.array(ser_step, dtype=np.int64),
            "reg_ser_pop": np.array(ser_pop, dtype=np.int64),
            "reg_last_step": np.array([self.last_step], dtype=np.int64),
        }

    @classmethod
    def from_arrays(cls, arrays) -> "MemeRegistry":
        reg = cls()
        keys = arrays["reg_keys"]
        first = arrays["reg_first"]
        for i, (k, f) in enumerate(zip(keys, first)):
            reg.records[int(k)] = MemeRecord(index=i, first_seen=int(f))
        recs = [reg.records[int(k)] for k in keys]
        for i, s, p in zip(
            arrays["reg_ser_idx"], arrays["reg_ser_step"], arrays["reg_ser_pop"]
        ):
            rec = recs[int(i)]
            rec.series[int(s)] = int(p)
            if p > rec.peak:
                rec.peak = int(p)
        reg.last_step = int(arrays["reg_last_step"][0])
        return reg

    def dump_jsonl(self, path) -> None:
        """One meme per line, in appearance order."""
        recs = sorted(self.records.items(), key=lambda kv: kv[1].index)
        with open(path, "w", encoding="utf-8") as fh:
            for key, rec in recs:
                fh.write(json.dumps({
                    "key": int(key),
                    "index": rec.index,
                    "first_seen": rec.first_seen,
                    "peak": rec.peak,
                    "series": {str(s): rec.series[s] for s in sorted(rec.series)},
                }) + "\n")


def registries_equal(a: MemeRegistry, b: MemeRegistry) -> bool:
    if set(a.records) != set(b.records):
        return False
    for k, ra in a.records.items():
        rb = b.records[k]
        if (ra.index, ra.first_seen, ra.peak, ra.series) != (
            rb.index, rb.first_seen, rb.peak, rb.series
        ):
            return False
    return True


@dataclass
class RunSummary:
    steps: int
    grid_size: int
    max_pop: np.ndarray  # per step
    distinct: np.ndarray
    n_above_40: np.ndarray
    n_above_8: np.ndarray
    coverage: np.ndarray
    peak_counts: dict
    coverage_windows: list
    distinct_total: int

    def table1_line(self) -> str:
        return (
            f"max_pop={int(self.max_pop.max(initial=0))} "
            f"n_gt40={self.peak_counts['gt_40']}"
        )


def summarize(registry: MemeRegistry, steps: int, grid_size: int,
              window: int = 1000) -> RunSummary:
    """Pure fold over the registry into per-step and run-level statistics."""
    max_pop = np.zeros(steps, dtype=np.int64)
    distinct = np.zeros(steps, dtype=np.int64)
    n40 = np.zeros(steps, dtype=np.int64)
    n8 = np.zeros(steps, dtype=np.int64)
    peaks = np.array([r.peak for r in registry.records.values()], dtype=np.int64)
    for rec in registry.records.values():
        for s, pop in rec.series.items():
            if s >= steps:
                continue
            distinct[s] += 1
            if pop > max_pop[s]:
                max_pop[s] = pop
            if pop > 40:
                n40[s] += 1
            if pop >= 8:
                n8[s] += 1
    coverage = max_pop / float(grid_size)
    nwin = -(-steps // window) if steps else 0
    cov_windows = [
        float(coverage[w * window:(w + 1) * window].max(initial=0.0))
        for w in range(nwin)
    ]
    peak_counts = {
        "ge_8": int((peaks >= 8).sum()),
        "gt_10": int((peaks > 10).sum()),
        "ge_10": int((peaks >= 10).sum()),
        "ge_20": int((peaks >= 20).sum()),
        "gt_40": int((peaks > 40).sum()),
        "gt_80": int((peaks > 80).sum()),
    }
    return RunSummary(
        steps=steps,
        grid_size=grid_size,
        max_pop=max_pop,
        distinct=distinct,
        n_above_40=n40,
        n_above_8=n8,
        coverage=coverage,
        peak_counts=peak_counts,
        coverage_windows=cov_windows,
        distinct_total=len(registry),
    )


def write_stats_csv(summary: RunSummary, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "max_pop", "n_above_40", "n_above_8", "coverage",
                    "distinct"])
        for s in range(summary.steps):
            w.writerow([
                s,
                int(summary.max_pop[s]),
                int(summary.n_above_40[s]),
                int(summary.n_above_8[s]),
                repr(float(summary.coverage[s])),
                int(summary.distinct[s]),
            ])


def render_raster(registry: MemeRegistry, steps: int, threshold: int = 80,
                  max_width: int = 2048) -> np.ndarray:
    """Appearance-ordered dominance mask, max-pooled over column blocks.

    Rows are the memes whose population ever exceeded ``threshold``, in order
    of first appearance (never-dominant memes would be all-dark rows and are
    omitted so long runs stay tractable); columns are (possibly downsampled)
    steps. A pixel is bright iff the meme's population exceeded the threshold
    anywhere in the column's step range.
    """
    rows = sorted(
        (rec for rec in registry.records.values() if rec.peak > threshold),
        key=lambda r: r.index,
    )
    if not rows or steps == 0:
        return np.zeros((1, 1), dtype=np.uint8)
    block = max(1, -(-steps // max_width))
    width = -(-steps // block)
    img = np.zeros((len(rows), width), dtype=np.uint8)
    for row, rec in enumerate(rows):
        for s, pop in rec.series.items():
            if pop > threshold and s < steps:
                img[row, s // block] = 255
    return img


def write_pgm(img: np.ndarray, path) -> None:
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = (int(t) for t in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)
