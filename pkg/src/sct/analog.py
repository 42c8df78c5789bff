"""Integrated analog chain: direct coefficient mapping with LMMSE decoding.

Coefficients are kept in zig-zag band order (all blocks' band 0 first, then
band 1, ...), scaled to unit per-dimension variance using quantized band
sigmas shared as side info, weighted by a per-SFV power p proportional to
semantic score, and paired into complex symbols. The receiver applies the
closed-form per-dimension LMMSE estimate and unscales.

Both sides scale with the DEQUANTIZED sigma, so the noiseless path is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .allocation import (BAND_FULL, BAND_SCALAR, BandRecord,
                         dequantize_band_sigma, quantize_band_sigma)

SIGMA_FLOOR = 1e-6


def power_allocate(scores: Sequence[float],
                   n_symbols: Sequence[int]) -> np.ndarray:
    """p_i proportional to score, normalized so sum(p_i * n_i) = sum(n_i)."""
    s = np.asarray(scores, dtype=np.float64)
    n = np.asarray(n_symbols, dtype=np.float64)
    if n.sum() <= 0:
        raise ValueError("no symbols to allocate power over")
    if s.sum() <= 0:
        return np.ones_like(s)
    p = s / (s * n).sum() * n.sum()
    return p


def band_power_sigmas(coeffs: np.ndarray) -> np.ndarray:
    """Per-band RMS (root mean power) over the SFV's blocks; (64,)."""
    return np.sqrt(np.mean(coeffs.astype(np.float64) ** 2, axis=0))


def pooled_sigma(coeffs: np.ndarray, kept: int | None = None) -> float:
    """RMS over the first `kept` coefficients in band-major order (all when
    kept is None). The scalar record tier pools over exactly the transmitted
    prefix: pooling over untransmitted bands would misstate the energy of
    what is actually sent and break the per-symbol energy normalization.
    """
    zonal = coeffs.astype(np.float64).T.ravel()
    if kept is not None:
        zonal = zonal[:kept]
    if zonal.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(zonal ** 2)))


def make_band_record(label: int, coeffs: np.ndarray, tier: int,
                     n_symbols: int | None = None) -> BandRecord:
    """Side-info record for one SFV: per-band sigmas (full tier) or a single
    sigma pooled over the transmitted prefix (scalar tier, needs n_symbols).
    """
    if tier == BAND_FULL:
        q = quantize_band_sigma(band_power_sigmas(coeffs))
    else:
        kept = None if n_symbols is None \
            else min(2 * n_symbols, coeffs.size)
        q = quantize_band_sigma(np.array([pooled_sigma(coeffs, kept)]))
    return BandRecord(label, tier, q)


def record_sigmas(record: BandRecord) -> np.ndarray:
    """Dequantized per-band sigmas (64,) implied by a band record."""
    deq = dequantize_band_sigma(record.sigmas)
    if record.mode == BAND_SCALAR:
        deq = np.full(64, deq[0])
    return np.maximum(deq, SIGMA_FLOOR)


@dataclass(frozen=True)
class AnalogFrame:
    label: int
    kept: int               # transmitted real coefficients (= 2 * n_symbols max)
    power_weight: float
    symbols: np.ndarray     # complex


def analog_encode(coeffs: np.ndarray, n_symbols: int, p: float,
                  sigmas: np.ndarray, label: int = 0) -> AnalogFrame:
    """Keep the lowest 2*n_symbols coefficients in band-major order, scale
    each by sqrt(p/2)/sigma(band), pack pairs into complex symbols.

    Per-dimension variance p/2 makes the mean energy per complex symbol p,
    so the power normalization (sum p_i*n_i = sum n_i) yields unit mean
    transmit energy per symbol, matching the digital chain's Es = 1.
    """
    zonal = coeffs.T.ravel()  # band-major: (64, n_blocks) flattened
    kept = min(2 * n_symbols, zonal.size)
    n_blocks = coeffs.shape[0]
    band_of = np.arange(kept) // n_blocks
    scaled = zonal[:kept] * (np.sqrt(p / 2.0) / sigmas[band_of])
    if kept % 2:
        scaled = np.concatenate([scaled, [0.0]])  # pad imag of last symbol
    return AnalogFrame(label, kept, p, scaled[0::2] + 1j * scaled[1::2])


def lmmse_decode(received: np.ndarray, gains: np.ndarray, noise_var: float,
                 p: float, sigmas: np.ndarray, n_blocks: int,
                 kept: int) -> np.ndarray:
    """Per-dimension LMMSE estimate, then unscale; (n, 64).

    With per-dimension signal power p/2 and per-dimension noise power
    noise_var/2, the shrinkage g*(p/2)/(g^2*(p/2) + noise_var/2) simplifies
    to g*p/(g^2*p + noise_var).
    """
    g = np.broadcast_to(np.asarray(gains, dtype=np.float64), received.shape)
    dims = np.empty(2 * received.size)
    dim_gain = np.empty(2 * received.size)
    dims[0::2] = received.real
    dims[1::2] = received.imag
    dim_gain[0::2] = g
    dim_gain[1::2] = g
    est = dim_gain * p / (dim_gain ** 2 * p + noise_var) * dims
    est = est[:kept]
    band_of = np.arange(kept) // n_blocks
    unscaled = est * (sigmas[band_of] / np.sqrt(p / 2.0))
    zonal = np.zeros(n_blocks * 64)
    zonal[:kept] = unscaled
    return zonal.reshape(64, n_blocks).T


def flagged_blocks(rb_gains: np.ndarray, noise_var: float,
                   threshold: float) -> bool:
    """True when any carrying RB falls below the quality threshold.

    Zonal band-major order spreads every block across essentially all of the
    SFV's RBs, so the flag granularity is the whole SFV.
    """
    rb_gains = np.asarray(rb_gains, dtype=np.float64)
    return bool((rb_gains ** 2 / noise_var < threshold).any())
