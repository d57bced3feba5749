"""Toroidal grid topology: sites, neighborhoods, and index tables."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .config import ConfigError


class Site(NamedTuple):
    row: int
    col: int


def site_index(dims, site) -> int:
    return site[0] * dims[1] + site[1]


def index_site(dims, idx) -> Site:
    return Site(idx // dims[1], idx % dims[1])


def _offsets(radius):
    """Row-major box offsets excluding the center; fixes slot ordering."""
    return [
        (dr, dc)
        for dr in range(-radius, radius + 1)
        for dc in range(-radius, radius + 1)
        if (dr, dc) != (0, 0)
    ]


def neighborhood(dims, site, radius) -> list[Site]:
    """The (2r+1)^2 - 1 sites boxed around ``site``, toroidally wrapped.

    Order is row-major over offsets and is relied on everywhere a neighbor
    slot index appears (delivery, selection counts, promotion weights).
    """
    rows, cols = dims
    if radius < 1:
        raise ConfigError(f"radius must be >= 1, got {radius}")
    if rows < 2 * radius + 1 or cols < 2 * radius + 1:
        raise ConfigError(
            f"grid {rows}x{cols} too small for radius {radius}"
        )
    r0, c0 = site
    return [
        Site((r0 + dr) % rows, (c0 + dc) % cols) for dr, dc in _offsets(radius)
    ]


def neighbor_table(dims, radius) -> np.ndarray:
    """(grid_size, k) table of flat neighbor indices in slot order."""
    rows, cols = dims
    offs = _offsets(radius)
    rr, cc = np.divmod(np.arange(rows * cols, dtype=np.int64), cols)
    table = np.empty((rows * cols, len(offs)), dtype=np.int32)
    for k, (dr, dc) in enumerate(offs):
        table[:, k] = ((rr + dr) % rows) * cols + (cc + dc) % cols
    return table


def moore8_table(dims) -> np.ndarray:
    return neighbor_table(dims, 1)
