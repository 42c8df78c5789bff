"""Figure rendering for the CLI report paths (PNG next to CSV/PGM)."""

from __future__ import annotations

from typing import Dict, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .experiments import ComparisonResult, SweepRow  # noqa: E402

_CHAIN_STYLE = {
    "digital": dict(color="tab:blue", marker="o"),
    "analog": dict(color="tab:green", marker="s"),
    "baseline": dict(color="tab:red", marker="^"),
}


def save_rd_figure(rows: Sequence[SweepRow], path: str) -> None:
    """Rate-distortion curves: PSNR and weighted MSE versus rate."""
    chains: Dict[str, list] = {}
    for row in rows:
        chains.setdefault(row.chain, []).append(row)
    fig, (ax_psnr, ax_wmse) = plt.subplots(1, 2, figsize=(10, 4))
    for chain, points in chains.items():
        points = sorted(points, key=lambda r: r.rate)
        rates = [p.rate for p in points]
        style = _CHAIN_STYLE.get(chain, dict(marker="x"))
        ax_psnr.errorbar(rates, [p.psnr_mean for p in points],
                         yerr=[p.psnr_std for p in points],
                         label=chain, capsize=3, **style)
        ax_wmse.errorbar(rates, [p.wmse_mean for p in points],
                         yerr=[p.wmse_std for p in points],
                         label=chain, capsize=3, **style)
    ax_psnr.set_xlabel("rate R (symbols/pixel)")
    ax_psnr.set_ylabel("PSNR (dB)")
    ax_psnr.grid(True, alpha=0.3)
    ax_psnr.legend()
    ax_wmse.set_xlabel("rate R (symbols/pixel)")
    ax_wmse.set_ylabel("importance-weighted MSE")
    ax_wmse.set_yscale("log")
    ax_wmse.grid(True, alpha=0.3)
    ax_wmse.legend()
    snr = rows[0].snr_db if rows else 0.0
    fig.suptitle(f"rate-distortion sweep at SNR {snr:g} dB")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_comparison_panel(result: ComparisonResult, path: str) -> None:
    """Four-up panel: baseline, SCT without/with correction, mask view."""
    order = ("baseline", "digital_nocorr", "digital_corr", "mask")
    titles = {
        "baseline": "single stream",
        "digital_nocorr": "semantic, no correction",
        "digital_corr": "semantic, corrected",
        "mask": "corrupted blocks",
    }
    fig, axes = plt.subplots(1, 4, figsize=(12, 3.4))
    for ax, name in zip(axes, order):
        ax.imshow(np.asarray(result.images[name]), cmap="gray",
                  vmin=0, vmax=255, interpolation="nearest")
        title = titles[name]
        rep = result.reports.get(name)
        if rep is not None:
            title += f"\nPSNR {rep.psnr:.1f} dB"
        ax.set_title(title, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
