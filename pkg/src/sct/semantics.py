"""Semantic guidance: block transform, importance maps, SFV segmentation.

The analysis transform is the orthonormal 2-D type-II cosine transform on
centered 8x8 blocks, stored in zig-zag order (index 0 = DC). Importance is a
weighted sum of a per-block entropy proxy and a refinement map (analytic
center-surround saliency, or an activation map loaded from file).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .source_io import (BLOCK, BlockGrid, DimensionMismatchError,
                        SemanticLabelMap, SourceImage, _parse_pgm)


def _zigzag_order() -> np.ndarray:
    """(64, 2) array of (row, col) pairs in zig-zag scan order."""
    coords = []
    for s in range(2 * BLOCK - 1):
        diag = [(r, s - r) for r in range(max(0, s - BLOCK + 1),
                                          min(BLOCK, s + 1))]
        if s % 2 == 0:
            diag.reverse()  # even diagonals run bottom-left to top-right
        coords.extend(diag)
    return np.array(coords, dtype=np.int64)


ZIGZAG = _zigzag_order()
_ZZ_FLAT = ZIGZAG[:, 0] * BLOCK + ZIGZAG[:, 1]
_ZZ_INVERSE = np.argsort(_ZZ_FLAT)


@dataclass(frozen=True)
class FeatureMap:
    cols: int
    rows: int
    coeffs: np.ndarray  # (rows, cols, 64) float64, zig-zag order

    def copy(self) -> "FeatureMap":
        return FeatureMap(self.cols, self.rows, self.coeffs.copy())


@dataclass(frozen=True)
class ImportanceMap:
    cols: int
    rows: int
    values: np.ndarray  # (rows, cols) in [0, 1]
    weight_w: float


@dataclass(frozen=True)
class Sfv:
    """One semantic region's blocks and coefficients, plus its score."""
    label: int
    blocks: np.ndarray  # (n, 2) of (row, col), row-major order
    coeffs: np.ndarray  # (n, 64)
    score: float

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]


# ---------------------------------------------------------------------------
# transform

def _to_blocks(padded: np.ndarray, grid: BlockGrid) -> np.ndarray:
    arr = padded.reshape(grid.rows, BLOCK, grid.cols, BLOCK)
    return arr.transpose(0, 2, 1, 3)  # (rows, cols, 8, 8)


def forward_transform(padded: np.ndarray, grid: BlockGrid) -> FeatureMap:
    blocks = _to_blocks(padded.astype(np.float64) - 128.0, grid)
    spec = sfft.dctn(blocks, type=2, axes=(-2, -1), norm="ortho")
    coeffs = spec.reshape(grid.rows, grid.cols, 64)[..., _ZZ_FLAT]
    return FeatureMap(grid.cols, grid.rows, coeffs)


def inverse_blocks(coeffs: np.ndarray) -> np.ndarray:
    """Float inverse of the block transform; coeffs (..., 64) zig-zag."""
    spec = coeffs[..., _ZZ_INVERSE].reshape(*coeffs.shape[:-1], BLOCK, BLOCK)
    return sfft.idctn(spec, type=2, axes=(-2, -1), norm="ortho")


def forward_blocks(samples: np.ndarray) -> np.ndarray:
    """Forward transform of centered blocks (..., 8, 8) -> (..., 64)."""
    spec = sfft.dctn(samples, type=2, axes=(-2, -1), norm="ortho")
    return spec.reshape(*samples.shape[:-2], 64)[..., _ZZ_FLAT]


def inverse_transform(fm: FeatureMap, grid: BlockGrid) -> SourceImage:
    """Inverse transform, +128, round half away from zero, clamp, crop."""
    blocks = inverse_blocks(fm.coeffs) + 128.0
    rounded = np.sign(blocks) * np.floor(np.abs(blocks) + 0.5)
    clamped = np.clip(rounded, 0, 255)
    full = clamped.reshape(grid.rows, grid.cols, BLOCK, BLOCK)
    full = full.transpose(0, 2, 1, 3).reshape(grid.rows * BLOCK,
                                              grid.cols * BLOCK)
    height = grid.rows * BLOCK - grid.pad_bottom
    width = grid.cols * BLOCK - grid.pad_right
    samples = full[:height, :width].astype(np.uint8)
    return SourceImage(width, height, samples)


# ---------------------------------------------------------------------------
# importance maps

def entropy_map(fm: FeatureMap) -> np.ndarray:
    """Gaussian differential-entropy proxy on AC variance, max-normalized."""
    ac = fm.coeffs[..., 1:]
    var = ac.var(axis=-1)  # population variance of the 63 AC coefficients
    with np.errstate(divide="ignore"):
        raw = 0.5 * np.log2(2 * np.pi * np.e * var)
    raw = np.maximum(raw, 0.0)
    peak = raw.max()
    return raw / peak if peak > 0 else raw


def saliency_map(fm: FeatureMap) -> np.ndarray:
    """Center-surround DC contrast against existing 8-neighbors, normalized."""
    dc = fm.coeffs[..., 0]
    rows, cols = dc.shape
    total = np.zeros_like(dc)
    count = np.zeros_like(dc)
    for dr in (-1, 0, 1):
        for dc_ in (-1, 0, 1):
            if dr == 0 and dc_ == 0:
                continue
            src = dc[max(0, -dr):rows - max(0, dr),
                     max(0, -dc_):cols - max(0, dc_)]
            total[max(0, dr):rows - max(0, -dr),
                  max(0, dc_):cols - max(0, -dc_)] += src
            count[max(0, dr):rows - max(0, -dr),
                  max(0, dc_):cols - max(0, -dc_)] += 1
    raw = np.abs(dc - total / count)
    peak = raw.max()
    return raw / peak if peak > 0 else raw


def load_activation_map(path: str, grid: BlockGrid) -> np.ndarray:
    """Block-resolution activation map from a P5 file, scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, samples = _parse_pgm(data)
    if (width, height) != (grid.cols, grid.rows):
        raise DimensionMismatchError(
            f"activation map {width}x{height} does not match block grid "
            f"{grid.cols}x{grid.rows}")
    return samples.astype(np.float64) / 255.0


def fuse_importance(entropy: np.ndarray, refinement: np.ndarray,
                    w: float) -> ImportanceMap:
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"weight w={w} outside [0, 1]")
    if entropy.shape != refinement.shape:
        raise ValueError("map dimensions differ")
    values = w * entropy + (1.0 - w) * refinement
    rows, cols = values.shape
    return ImportanceMap(cols, rows, values, w)


def segment_sfvs(fm: FeatureMap, labels: SemanticLabelMap,
                 imp: ImportanceMap) -> list[Sfv]:
    """One SFV per label, blocks row-major, sorted by descending score."""
    lab = labels.labels
    sfvs = []
    for label in range(labels.n_labels):
        rr, cc = np.nonzero(lab == label)
        if rr.size == 0:
            continue
        order = np.lexsort((cc, rr))  # row-major
        blocks = np.column_stack((rr[order], cc[order]))
        coeffs = fm.coeffs[blocks[:, 0], blocks[:, 1]]
        score = float(imp.values[blocks[:, 0], blocks[:, 1]].sum())
        sfvs.append(Sfv(label, blocks, coeffs, score))
    sfvs.sort(key=lambda s: (-s.score, s.label))
    return sfvs
