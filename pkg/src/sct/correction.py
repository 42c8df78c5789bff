"""Semantic distortion correction.

Works on the block grid in the transform domain. A boolean mask marks blocks
whose coefficients are unreliable (integrity failure, truncation, dropped
stream, flagged analog resource blocks). A two-pass neighborhood repair fills
masked blocks from trusted donors, preferring donors with the same semantic
label; streams dropped by the allocator are first synthesized flat from the
shared per-label fill values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional

import numpy as np

from .semantics import FeatureMap

_NEIGHBOR_OFFSETS = [(-1, -1), (-1, 0), (-1, 1),
                     (0, -1), (0, 1),
                     (1, -1), (1, 0), (1, 1)]

DEFAULT_FILL = 128


@dataclass
class ErrorMask:
    """Per-block unreliability flags; True means 'do not trust'."""

    flags: np.ndarray  # (rows, cols) bool

    @property
    def fraction(self) -> float:
        return float(self.flags.mean()) if self.flags.size else 0.0

    def copy(self) -> "ErrorMask":
        return ErrorMask(self.flags.copy())


def build_mask(cols: int, rows: int,
               bad_blocks: Iterable[tuple[int, int]] = ()) -> ErrorMask:
    flags = np.zeros((rows, cols), dtype=bool)
    for rr, cc in bad_blocks:
        flags[rr, cc] = True
    return ErrorMask(flags)


def synthesize_dropped_regions(fm: FeatureMap, labels: np.ndarray,
                               mask: ErrorMask,
                               dropped_labels: Iterable[int],
                               fills: Mapping[int, int]) -> None:
    """Replace blocks of dropped streams with a flat patch at the label's
    shared fill value, then clear them from the mask (they are now the best
    available estimate and must not be repaired from neighboring regions)."""
    for label in dropped_labels:
        sel = labels == label
        if not sel.any():
            continue
        fill = fills.get(label, DEFAULT_FILL)
        fm.coeffs[sel] = 0.0
        fm.coeffs[sel, 0] = 8.0 * (fill - 128.0)
        mask.flags[sel] = False


def _neighbor_dc_mean(fm: FeatureMap, labels: np.ndarray,
                      trusted: np.ndarray, rr: int, cc: int,
                      label: int) -> Optional[float]:
    """Mean DC of trusted 8-neighbors, same label preferred; None if no
    trusted neighbor exists at all."""
    rows, cols = trusted.shape
    same: list[float] = []
    any_: list[float] = []
    for dr, dc in _NEIGHBOR_OFFSETS:
        nr, nc = rr + dr, cc + dc
        if not (0 <= nr < rows and 0 <= nc < cols):
            continue
        if not trusted[nr, nc]:
            continue
        dc_val = float(fm.coeffs[nr, nc, 0])
        any_.append(dc_val)
        if labels[nr, nc] == label:
            same.append(dc_val)
    if same:
        return float(np.mean(same))
    if any_:
        return float(np.mean(any_))
    return None


def _label_ac_means(fm: FeatureMap, labels: np.ndarray,
                    trusted: np.ndarray) -> Dict[int, np.ndarray]:
    """Per-band mean AC coefficients over trusted blocks, keyed by label."""
    means: Dict[int, np.ndarray] = {}
    for label in np.unique(labels):
        sel = (labels == label) & trusted
        if sel.any():
            means[int(label)] = fm.coeffs[sel].mean(axis=0)
    return means


def _repair_block(fm: FeatureMap, rr: int, cc: int, dc_value: float,
                  ac_means: Dict[int, np.ndarray], label: int) -> None:
    ac = ac_means.get(label)
    if ac is not None:
        fm.coeffs[rr, cc, 1:] = ac[1:]
    else:
        fm.coeffs[rr, cc, 1:] = 0.0
    fm.coeffs[rr, cc, 0] = dc_value


def inpaint_feature_map(fm: FeatureMap, labels: np.ndarray, mask: ErrorMask,
                        fills: Optional[Mapping[int, int]] = None) -> int:
    """Two-pass repair of masked blocks in place; returns blocks repaired.

    Pass 1 repairs every masked block that has at least one trusted
    8-neighbor: DC from the mean of trusted same-label neighbors (any trusted
    neighbor as fallback), AC bands from the mean over all trusted same-label
    blocks (zero if none). Pass 2 retries the remainder with pass-1 repairs
    admitted as donors; blocks still without a donor get a flat patch at the
    label's fill value. Each block is repaired at most once and trusted blocks
    are never modified.
    """
    if fills is None:
        fills = {}
    flags = mask.flags
    rows, cols = flags.shape
    trusted0 = ~flags
    masked = [(rr, cc) for rr in range(rows) for cc in range(cols)
              if flags[rr, cc]]
    if not masked:
        return 0

    ac_means0 = _label_ac_means(fm, labels, trusted0)
    pass1: list[tuple[int, int, float]] = []
    deferred: list[tuple[int, int]] = []
    for rr, cc in masked:
        dc = _neighbor_dc_mean(fm, labels, trusted0, rr, cc,
                               int(labels[rr, cc]))
        if dc is None:
            deferred.append((rr, cc))
        else:
            pass1.append((rr, cc, dc))
    for rr, cc, dc in pass1:
        _repair_block(fm, rr, cc, dc, ac_means0, int(labels[rr, cc]))

    repaired = np.zeros_like(flags)
    for rr, cc, _ in pass1:
        repaired[rr, cc] = True
    trusted1 = trusted0 | repaired
    ac_means1 = _label_ac_means(fm, labels, trusted1)
    pass2: list[tuple[int, int, float]] = []
    for rr, cc in deferred:
        dc = _neighbor_dc_mean(fm, labels, trusted1, rr, cc,
                               int(labels[rr, cc]))
        if dc is None:
            fill = fills.get(int(labels[rr, cc]), DEFAULT_FILL)
            dc = 8.0 * (fill - 128.0)
            pass2.append((rr, cc, dc))
        else:
            pass2.append((rr, cc, dc))
    for rr, cc, dc in pass2:
        _repair_block(fm, rr, cc, dc, ac_means1, int(labels[rr, cc]))
    return len(pass1) + len(pass2)
