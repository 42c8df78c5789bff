"""Mode selection, importance-proportional budgets, RB assignment, side info.

The channel is symbol-level OFDM: resource blocks (RBs) of n_re complex
symbols share one fading gain. The transmitter knows the gains, so RBs are
sorted by gain and handed out in score order, side info first. Budgets are
complex-symbol counts; one info bit per symbol (QPSK x rate 1/2) keeps the
arithmetic exact for the digital chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .bitstream import bytes_to_bits, crc16_bytes


class InfeasibleAllocationError(Exception):
    """The symbol budget cannot cover the minimum per-SFV allocations."""


class SideInfoFormatError(Exception):
    """A side-info byte stream failed structural validation or CRC."""


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float = 1.0
    fading: Literal["awgn", "rayleigh-block"] = "awgn"
    n_rb: int = 0  # 0 = derive from budget
    n_re: int = 12
    seed: int = 0


@dataclass(frozen=True)
class ChannelRealization:
    gains: np.ndarray  # (n_rb,) non-negative amplitudes
    noise_var: float   # per complex symbol


@dataclass
class PlanEntry:
    label: int
    score: float
    n_symbols: int
    rb_ids: list[int] = field(default_factory=list)
    dropped: bool = False
    truncated: bool = False


@dataclass
class AllocationPlan:
    mode: Literal["overall", "selective"]
    entries: list[PlanEntry]  # descending score
    side_info_symbols: int = 0
    side_info_rb_ids: list[int] = field(default_factory=list)


# ---------------------------------------------------------------------------
# mode + budgets

def select_mode(scores: Sequence[float], tau: float = 0.5) -> str:
    """'selective' iff the population coefficient of variation exceeds tau."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no scores")
    mean = arr.mean()
    if mean <= 0:
        return "overall"
    return "selective" if arr.std() / mean > tau else "overall"


def total_budget(rate: float, width: int, height: int) -> int:
    return int(np.floor(rate * width * height))


def allocate_budgets(scored: Sequence[tuple[int, float]], budget: int,
                     mode: str, drop_quantile: float = 0.25,
                     n_min: int = 16,
                     side_info_symbols: int = 0) -> AllocationPlan:
    """Split the symbol budget across SFVs proportionally to score.

    scored: (label, score) pairs. Side info is paid for first; in selective
    mode, scores strictly below the drop quantile are dropped.
    """
    entries = [PlanEntry(label, float(score), 0)
               for label, score in scored]
    entries.sort(key=lambda e: (-e.score, e.label))
    remaining = budget - side_info_symbols
    if mode == "selective":
        scores = np.array([e.score for e in entries])
        cut = float(np.quantile(scores, drop_quantile))
        for e in entries:
            if e.score < cut:
                e.dropped = True
    kept = [e for e in entries if not e.dropped]
    if remaining < n_min * len(kept):
        raise InfeasibleAllocationError(
            f"budget {budget} (minus side info {side_info_symbols}) cannot "
            f"cover {len(kept)} SFVs at n_min={n_min}")
    total_score = sum(e.score for e in kept)
    for e in kept:
        share = e.score / total_score if total_score > 0 else 1.0 / len(kept)
        e.n_symbols = max(n_min, int(np.floor(remaining * share)))
    used = sum(e.n_symbols for e in kept)
    if used < remaining:
        kept[0].n_symbols += remaining - used  # remainder to the top score
    elif used > remaining:
        # the n_min floor forced an overshoot: shrink from the lowest score up
        excess = used - remaining
        for e in reversed(kept):
            give = min(excess, e.n_symbols - n_min)
            e.n_symbols -= give
            excess -= give
            if excess == 0:
                break
    return AllocationPlan(mode=mode, entries=entries,
                          side_info_symbols=side_info_symbols)


# ---------------------------------------------------------------------------
# channel

def realize_channel(cfg: ChannelConfig, n_rb: Optional[int] = None,
                    rng: Optional[np.random.Generator] = None
                    ) -> ChannelRealization:
    count = n_rb if n_rb is not None else cfg.n_rb
    if count < 1:
        raise ValueError("RB count must be >= 1")
    noise_var = 10.0 ** (-cfg.snr_db / 10.0)
    if cfg.fading == "awgn":
        gains = np.ones(count)
    else:
        if rng is None:
            rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xC4)))
        h = (rng.standard_normal(count)
             + 1j * rng.standard_normal(count)) / np.sqrt(2.0)
        gains = np.abs(h)
    return ChannelRealization(gains=gains, noise_var=noise_var)


def rb_capacity(g: float, noise_var: float, n_re: int) -> float:
    return n_re * np.log2(1.0 + g * g / noise_var)


def derive_n_rb(budget: int, n_re: int) -> int:
    """Default RB pool: enough for the budget plus per-stream rounding slack."""
    return int(np.ceil(budget / n_re)) + 4


def assign_rbs(plan: AllocationPlan, ch: ChannelRealization, n_re: int,
               capacity_aligned: bool = False) -> AllocationPlan:
    """Hand gain-sorted RBs to side info first, then SFVs in score order."""
    order = np.lexsort((np.arange(ch.gains.size), -ch.gains))
    pool = list(order)

    def take(n_symbols: int) -> list[int]:
        need = int(np.ceil(n_symbols / n_re))
        if capacity_aligned and n_symbols > 0:
            target_bits = 2.0 * n_symbols
            got, acc = 0, 0.0
            for rb in pool:
                if acc >= target_bits and got >= int(np.ceil(n_symbols / n_re)):
                    break
                acc += rb_capacity(ch.gains[rb], ch.noise_var, n_re)
                got += 1
            need = max(need, got)
        taken = pool[:need]
        del pool[:need]
        return taken

    if plan.side_info_symbols > 0:
        plan.side_info_rb_ids = take(plan.side_info_symbols)
    for e in plan.entries:
        if e.dropped or e.n_symbols == 0:
            continue
        e.rb_ids = take(e.n_symbols)
        cap = len(e.rb_ids) * n_re
        if cap < e.n_symbols:
            e.truncated = True
            e.n_symbols = cap
    return plan


# ---------------------------------------------------------------------------
# side info wire format
#
# header {cols:8, rows:8, L:8}, L fill bytes, row-major RLE {label:8,
# run_len:16}, optional per-SFV analog band records {label:8, mode:8,
# 64 sigma bytes (mode 0) | 1 sigma byte (mode 1)}, CRC-16 over everything.

BAND_FULL = 0
BAND_SCALAR = 1


@dataclass(frozen=True)
class BandRecord:
    label: int
    mode: int            # BAND_FULL or BAND_SCALAR
    sigmas: np.ndarray   # quantized uint8, 64 entries (full) or 1 (scalar)


@dataclass(frozen=True)
class SideInfo:
    labels: np.ndarray            # (rows, cols) block labels
    fills: np.ndarray             # (L,) uint8 per-label fill values
    band_records: tuple[BandRecord, ...] = ()


def quantize_band_sigma(sigma: np.ndarray) -> np.ndarray:
    q = np.round(32.0 * np.log2(1.0 + np.asarray(sigma, dtype=np.float64)))
    return np.clip(q, 0, 255).astype(np.uint8)


def dequantize_band_sigma(q: np.ndarray) -> np.ndarray:
    return 2.0 ** (np.asarray(q, dtype=np.float64) / 32.0) - 1.0


def _rle_runs(labels: np.ndarray) -> list[tuple[int, int]]:
    flat = labels.ravel()
    runs: list[tuple[int, int]] = []
    start = 0
    for i in range(1, flat.size + 1):
        if i == flat.size or flat[i] != flat[start]:
            length = i - start
            while length > 0xFFFF:
                runs.append((int(flat[start]), 0xFFFF))
                length -= 0xFFFF
            runs.append((int(flat[start]), length))
            start = i
    return runs


def encode_side_info(labels: np.ndarray, fills: Sequence[int],
                     band_records: Sequence[BandRecord] = ()) -> bytes:
    rows, cols = labels.shape
    n_labels = len(fills)
    if not (1 <= n_labels <= 255 and cols <= 255 and rows <= 255):
        raise ValueError("side info header field out of range")
    out = bytearray([cols, rows, n_labels])
    out.extend(int(f) & 0xFF for f in fills)
    for label, run in _rle_runs(labels):
        out.append(label)
        out.extend(run.to_bytes(2, "big"))
    for rec in band_records:
        out.append(rec.label)
        out.append(rec.mode)
        out.extend(np.asarray(rec.sigmas, dtype=np.uint8).tobytes())
    crc = crc16_bytes(bytes(out))
    out.extend(crc.to_bytes(2, "big"))
    return bytes(out)


def encode_label_side_info(labels: np.ndarray,
                           fills: Sequence[int]) -> bytes:
    """Label map + fills only (the digital chain's selective-mode stream)."""
    return encode_side_info(labels, fills)


def decode_side_info(data: bytes,
                     record_labels: Sequence[int] = ()) -> Optional[SideInfo]:
    """Inverse of encode_side_info; None on CRC mismatch or bad structure.

    record_labels lists the SFV labels whose band records the stream carries
    (in order); it is plan metadata the receiver already has.
    """
    if len(data) < 5:
        return None
    if crc16_bytes(data[:-2]) != int.from_bytes(data[-2:], "big"):
        return None
    body = data[:-2]
    cols, rows, n_labels = body[0], body[1], body[2]
    pos = 3
    if n_labels < 1 or len(body) < pos + n_labels:
        return None
    fills = np.frombuffer(body[pos:pos + n_labels], dtype=np.uint8).copy()
    pos += n_labels
    flat = np.zeros(rows * cols, dtype=np.int64)
    filled = 0
    while filled < flat.size:
        if pos + 3 > len(body):
            return None
        label = body[pos]
        run = int.from_bytes(body[pos + 1:pos + 3], "big")
        pos += 3
        if label >= n_labels or run == 0 or filled + run > flat.size:
            return None
        flat[filled:filled + run] = label
        filled += run
    records = []
    for expect in record_labels:
        if pos + 2 > len(body):
            return None
        label, mode = body[pos], body[pos + 1]
        pos += 2
        n_sig = 64 if mode == BAND_FULL else 1
        if label != expect or mode not in (BAND_FULL, BAND_SCALAR) \
                or pos + n_sig > len(body):
            return None
        sigmas = np.frombuffer(body[pos:pos + n_sig], dtype=np.uint8).copy()
        pos += n_sig
        records.append(BandRecord(label, mode, sigmas))
    if pos != len(body):
        return None
    return SideInfo(flat.reshape(rows, cols), fills, tuple(records))


def decode_label_side_info(data: bytes
                           ) -> Optional[tuple[np.ndarray, np.ndarray]]:
    si = decode_side_info(data)
    return None if si is None else (si.labels, si.fills)


def side_info_symbol_cost(n_bytes: int) -> int:
    """Complex symbols to carry a side-info frame (1 info bit per symbol,
    plus the 6 tail bits of the terminated code)."""
    return 8 * n_bytes + 6
