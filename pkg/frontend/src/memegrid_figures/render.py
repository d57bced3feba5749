"""The three figure analogs: meme raster, dominance statistics, sweep plots."""

from __future__ import annotations

import logging

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import FigureSpec, read_registry, read_stats, read_sweep

log = logging.getLogger(__name__)

BIN_WIDTH = 0.2  # fig3a trend bins over selection strength


def raster_mask(entries, steps, threshold, max_width) -> np.ndarray:
    """Appearance-ordered bright-where-dominant mask, one row per meme."""
    block = max(1, -(-steps // max_width))
    width = -(-steps // block)
    img = np.zeros((len(entries), width), dtype=np.uint8)
    for row, e in enumerate(entries):
        for s, pop in e.series.items():
            if pop > threshold and s < steps:
                img[row, s // block] = 255
    return img


def render_fig1(spec: FigureSpec) -> dict:
    entries = read_registry(spec.registry_path)
    stats = read_stats(spec.stats_path)
    steps = int(stats.step[-1]) + 1
    img = raster_mask(entries, steps, spec.raster_threshold, spec.max_width)
    out = spec.out_dir / "fig1_meme_raster.png"
    # imsave keeps the array's pixel grid exactly: rows = memes, cols = steps
    plt.imsave(out, img, cmap="gray", vmin=0, vmax=255)
    return {"path": out, "shape": img.shape}


def render_fig2(spec: FigureSpec) -> dict:
    stats = read_stats(spec.stats_path)
    nwin = -(-len(stats.step) // spec.window)
    win_peaks = [
        float(stats.coverage[w * spec.window:(w + 1) * spec.window].max())
        for w in range(nwin)
    ]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6))
    ax1.plot(stats.step, stats.max_pop, lw=0.8)
    ax1.set_xlabel("step")
    ax1.set_ylabel("population of most populous message")
    ax2.hist(win_peaks, bins=20, range=(0.0, 1.0), color="#777777")
    ax2.set_xlabel(f"peak coverage of top message per {spec.window}-step window")
    ax2.set_ylabel("windows")
    fig.tight_layout()
    out = spec.out_dir / "fig2_dominance.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return {"path": out, "windows": win_peaks}


def binned_means(x, y, width=BIN_WIDTH):
    """Mean of y in consecutive x-bins of the given width over [0, 1]."""
    edges = np.arange(0.0, 1.0 + width / 2, width)
    centers, means = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (x >= lo) & (x < hi) if hi < 1.0 else (x >= lo) & (x <= hi)
        if mask.any():
            centers.append((lo + hi) / 2)
            means.append(float(np.mean(y[mask])))
    return np.array(centers), np.array(means), edges


def render_fig3(spec: FigureSpec) -> dict:
    rows = read_sweep(spec.sweep_path)
    gs = np.array([r.gamma_s for r in rows])
    gf = np.array([r.gamma_f for r in rows])
    fit = np.array([r.fitness for r in rows])
    memes = np.array([r.n_memes for r in rows])

    fig, (ax_a, ax_b, ax_c) = plt.subplots(1, 3, figsize=(13, 4))

    # (a) meme count vs task selection strength at full memetic selection,
    # with the bin-width-0.2 trend line
    sel0 = gs == 0.0
    x_a = 1.0 - gf[sel0]
    ax_a.scatter(x_a, memes[sel0], s=18, alpha=0.8)
    centers, means, _ = binned_means(x_a, memes[sel0])
    ax_a.plot(centers, means, "-o", color="tab:red", ms=4,
              label=f"mean per {BIN_WIDTH}-wide bin")
    ax_a.set_xlabel("task selection strength (1 - gamma_f)")
    ax_a.set_ylabel(f"memes with population >= {spec.meme_threshold}")
    ax_a.legend(fontsize=8)

    # (b) meme count vs gamma_f, one series per gamma_s
    for value in sorted(set(gs)):
        mask = gs == value
        ax_b.scatter(gf[mask], memes[mask], s=18, alpha=0.8,
                     label=f"gamma_s={value:g}")
    ax_b.set_xlabel("gamma_f")
    ax_b.set_ylabel(f"memes with population >= {spec.meme_threshold}")
    ax_b.legend(fontsize=8)

    # (c) fitness against both selection strengths
    sc = ax_c.scatter(1.0 - gf, fit, c=1.0 - gs, cmap="viridis", s=20)
    ax_c.set_xlabel("task selection strength (1 - gamma_f)")
    ax_c.set_ylabel("mean final fitness")
    fig.colorbar(sc, ax=ax_c, label="memetic selection strength (1 - gamma_s)")

    fig.tight_layout()
    out = spec.out_dir / "fig3_selection_sweep.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return {"path": out, "bin_width": BIN_WIDTH,
            "bin_centers": centers.tolist(), "bin_means": means.tolist()}


def render_all(spec: FigureSpec) -> dict:
    """Render whatever inputs exist; per-figure failures skip with a warning.

    Returns {figure name: result dict}; raises RuntimeError only when no
    figure could be produced at all.
    """
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    for name, fn in (("fig1", render_fig1), ("fig2", render_fig2),
                     ("fig3", render_fig3)):
        try:
            results[name] = fn(spec)
        except (OSError, ValueError, KeyError) as exc:
            log.warning("skipping %s: %s", name, exc)
    if not results:
        raise RuntimeError(f"no figure inputs found under {spec.run_dir}")
    return results
