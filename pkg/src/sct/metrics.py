"""Reconstruction quality metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .source_io import BLOCK, BlockGrid

PSNR_CAP = 99.0
PEAK = 255.0


def mse(reference: np.ndarray, test: np.ndarray) -> float:
    a = reference.astype(np.float64)
    b = test.astype(np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(reference: np.ndarray, test: np.ndarray) -> float:
    e = mse(reference, test)
    if e <= 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(PEAK ** 2 / e))


def block_mse_map(reference: np.ndarray, test: np.ndarray,
                  grid: BlockGrid) -> np.ndarray:
    """Per-block MSE over the ORIGINAL (unpadded) pixels; (rows, cols).

    Blocks that lie entirely in the padding contribute zero error over zero
    pixels and are reported as 0.
    """
    h, w = reference.shape
    out = np.zeros((grid.rows, grid.cols))
    err = (reference.astype(np.float64) - test.astype(np.float64)) ** 2
    for rr in range(grid.rows):
        r0, r1 = rr * BLOCK, min((rr + 1) * BLOCK, h)
        if r0 >= h:
            continue
        for cc in range(grid.cols):
            c0, c1 = cc * BLOCK, min((cc + 1) * BLOCK, w)
            if c0 >= w:
                continue
            out[rr, cc] = err[r0:r1, c0:c1].mean()
    return out


def weighted_mse(reference: np.ndarray, test: np.ndarray, grid: BlockGrid,
                 importance: np.ndarray) -> float:
    """Importance-weighted mean of per-block MSE.

    Weights are the normalized block importances; a degenerate all-zero
    importance map falls back to uniform weights.
    """
    per_block = block_mse_map(reference, test, grid)
    imp = np.asarray(importance, dtype=np.float64)
    if imp.shape != per_block.shape:
        raise ValueError("importance map shape does not match grid")
    total = imp.sum()
    if total <= 0.0:
        weights = np.full_like(imp, 1.0 / imp.size)
    else:
        weights = imp / total
    return float((weights * per_block).sum())


def per_label_psnr(reference: np.ndarray, test: np.ndarray,
                   pixel_labels: np.ndarray) -> Dict[int, float]:
    out: Dict[int, float] = {}
    a = reference.astype(np.float64)
    b = test.astype(np.float64)
    for label in np.unique(pixel_labels):
        sel = pixel_labels == label
        e = float(np.mean((a[sel] - b[sel]) ** 2))
        if e <= 0.0:
            out[int(label)] = PSNR_CAP
        else:
            out[int(label)] = min(PSNR_CAP, 10.0 * np.log10(PEAK ** 2 / e))
    return out


@dataclass
class ReconstructionReport:
    psnr: float
    mse: float
    weighted_mse: float
    per_label_psnr: Dict[int, float]
    mask_fraction: float
    mode: Optional[str]
    symbols_used: int = 0
    side_info_symbols: int = 0
    side_info_fraction: float = 0.0
    flags: Tuple[str, ...] = field(default_factory=tuple)


def compute_metrics(reference: np.ndarray, test: np.ndarray, grid: BlockGrid,
                    importance: np.ndarray, pixel_labels: np.ndarray,
                    mask_fraction: float, mode: Optional[str],
                    side_info_symbols: int = 0,
                    budget_symbols: int = 0,
                    flags: Tuple[str, ...] = ()) -> ReconstructionReport:
    frac = (side_info_symbols / budget_symbols) if budget_symbols else 0.0
    return ReconstructionReport(
        psnr=psnr(reference, test),
        mse=mse(reference, test),
        weighted_mse=weighted_mse(reference, test, grid, importance),
        per_label_psnr=per_label_psnr(reference, test, pixel_labels),
        mask_fraction=mask_fraction,
        mode=mode,
        side_info_symbols=side_info_symbols,
        side_info_fraction=frac,
        flags=flags,
    )
