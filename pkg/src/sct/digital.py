"""Modular digital chain: quantize, entropy-code, packetize, code, modulate.

Per SFV: dead-zone quantization at a step chosen from a geometric ladder to
fit the symbol budget, run-level Exp-Golomb coding per block, packets with
{label, seq, first_block_index, payload_bits} headers and CRC-16, one
terminated convolutional frame over the packet stream, QPSK on the assigned
RBs. The classical baseline sends the whole image as ONE stream with a
single CRC and no block indices, so a desync after a residual bit error
wipes out everything behind it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bitstream import (BitReader, BitWriter, CorruptStreamError, crc16,
                        exp_golomb_decode, exp_golomb_encode,
                        exp_golomb_length, unzigzag_int, zigzag_int)
from .convcode import (TAIL, conv_encode, qpsk_llr, qpsk_modulate,
                       viterbi_decode)

# geometric quantizer ladder: quarter-steps of a factor-2 progression
STEP_LADDER = 0.25 * 2.0 ** (np.arange(41) / 4.0)

HEADER_BITS = 48
CRC_BITS = 16
PACKET_OVERHEAD = HEADER_BITS + CRC_BITS
MAX_PAYLOAD_BITS = 4096
DEFAULT_PAYLOAD_BITS = 256


# ---------------------------------------------------------------------------
# quantizer

def quantize(coeffs: np.ndarray, step: float) -> np.ndarray:
    """Dead-zone: q = sign(x) * floor(|x| / step)."""
    return (np.sign(coeffs) * np.floor(np.abs(coeffs) / step)).astype(np.int64)


def dequantize(indices: np.ndarray, step: float) -> np.ndarray:
    mag = (np.abs(indices) + 0.5) * step
    return np.where(indices == 0, 0.0, np.sign(indices) * mag)


# ---------------------------------------------------------------------------
# run-level entropy coding (per 8x8 block of zig-zag indices)

def encode_block(indices: np.ndarray) -> np.ndarray:
    """(run, level) pairs as Exp-Golomb, explicit end-of-block ("1" "1")."""
    w = BitWriter()
    run = 0
    for v in indices:
        if v == 0:
            run += 1
            continue
        w.write_array(exp_golomb_encode(run))
        w.write_array(exp_golomb_encode(zigzag_int(int(v))))
        run = 0
    w.write_array(exp_golomb_encode(0))  # EOB: run escape ...
    w.write_array(exp_golomb_encode(0))  # ... plus level code 0
    return w.to_array()


def block_bit_length(indices: np.ndarray) -> int:
    bits = 2  # EOB
    run = 0
    for v in indices:
        if v == 0:
            run += 1
            continue
        bits += exp_golomb_length(run)
        bits += exp_golomb_length(zigzag_int(int(v)))
        run = 0
    return bits


def decode_blocks(reader: BitReader, max_blocks: int) -> tuple[np.ndarray, int]:
    """Decode blocks until the stream runs out or turns invalid.

    Returns (indices (max_blocks, 64), number of cleanly decoded blocks).
    Blocks at and after the stop point are left all zero.
    """
    out = np.zeros((max_blocks, 64), dtype=np.int64)
    b = 0
    while b < max_blocks and reader.remaining > 0:
        pos = 0
        try:
            while True:
                run = exp_golomb_decode(reader)
                level_code = exp_golomb_decode(reader)
                if level_code == 0:
                    if run != 0:
                        raise CorruptStreamError("level 0 with nonzero run")
                    break  # end of block
                pos += run
                if pos > 63:
                    raise CorruptStreamError("coefficient position overrun")
                out[b, pos] = unzigzag_int(level_code)
                pos += 1
        except CorruptStreamError:
            out[b:] = 0
            return out, b
        b += 1
    return out, b


# ---------------------------------------------------------------------------
# packets

@dataclass(frozen=True)
class Packet:
    label: int
    seq: int
    first_block: int      # index into the SFV's ordered block list
    payload: np.ndarray   # bits
    n_blocks: int         # blocks covered (encoder-side metadata)

    def bits(self) -> np.ndarray:
        w = BitWriter()
        w.write_bits(self.label & 0xFF, 8)
        w.write_bits(self.seq & 0xFF, 8)
        w.write_bits(self.first_block, 16)
        w.write_bits(self.payload.size, 16)
        w.write_array(self.payload)
        body = w.to_array()
        w.write_bits(crc16(body), 16)
        return w.to_array()


def packetize(label: int, block_bits: list[np.ndarray],
              payload_limit: int = DEFAULT_PAYLOAD_BITS,
              info_capacity: int | None = None
              ) -> tuple[list[Packet], int]:
    """Split at block boundaries; a single oversized block gets its own
    enlarged packet. Returns (packets, blocks covered). Packets stop when
    info_capacity would be exceeded, leaving an uncovered tail.
    """
    packets: list[Packet] = []
    used = 0
    covered = 0
    seq = 0
    i = 0
    while i < len(block_bits):
        first = i
        size = 0
        while i < len(block_bits):
            nxt = block_bits[i].size
            if size > 0 and size + nxt > payload_limit:
                break
            size += nxt
            i += 1
        if size > MAX_PAYLOAD_BITS:
            raise ValueError("single block exceeds the packet size ceiling")
        if info_capacity is not None \
                and used + size + PACKET_OVERHEAD > info_capacity:
            return packets, covered
        payload = np.concatenate(block_bits[first:i]) if size else \
            np.zeros(0, dtype=np.uint8)
        packets.append(Packet(label, seq & 0xFF, first, payload, i - first))
        used += size + PACKET_OVERHEAD
        covered = i
        seq += 1
    return packets, covered


@dataclass(frozen=True)
class RxPacket:
    ok: bool
    first_block: int
    payload: np.ndarray


def depacketize(bits: np.ndarray) -> tuple[list[RxPacket], bool]:
    """Walk the received packet stream; returns (packets, parse_ok).

    parse_ok goes False when a (possibly corrupted) length field runs past
    the stream end, in which case everything behind the last parsed packet
    is unaccounted for.
    """
    packets: list[RxPacket] = []
    pos = 0
    n = bits.size
    while n - pos >= PACKET_OVERHEAD:
        header = bits[pos:pos + HEADER_BITS]
        r = BitReader(header, 8 + 8)
        first_block = r.read_bits(16)
        payload_bits = r.read_bits(16)
        end = pos + HEADER_BITS + payload_bits + CRC_BITS
        if end > n:
            return packets, False
        body = bits[pos:pos + HEADER_BITS + payload_bits]
        crc = BitReader(bits, pos + HEADER_BITS + payload_bits).read_bits(16)
        ok = crc16(body) == crc
        packets.append(RxPacket(ok, first_block,
                                bits[pos + HEADER_BITS:end - CRC_BITS]))
        pos = end
    return packets, pos == n


# ---------------------------------------------------------------------------
# step choice and the per-SFV codec

def choose_step(coeffs: np.ndarray, info_capacity: int,
                payload_limit: int = DEFAULT_PAYLOAD_BITS
                ) -> tuple[float, bool]:
    """Smallest ladder step whose coded size (payload + packet overhead)
    fits the info capacity; falls back to all-zero at the largest step."""
    n_blocks = coeffs.shape[0]
    for step in STEP_LADDER:
        idx = quantize(coeffs, step)
        lengths = [block_bit_length(idx[b]) for b in range(n_blocks)]
        if _packetized_size(lengths, payload_limit) <= info_capacity:
            return float(step), False
    return float(STEP_LADDER[-1]), True


def _packetized_size(lengths: list[int], payload_limit: int) -> int:
    total = 0
    size = 0
    packets = 0
    for ln in lengths:
        if size > 0 and size + ln > payload_limit:
            total += size + PACKET_OVERHEAD
            packets += 1
            size = 0
        size += ln
    if size or packets == 0:
        total += size + PACKET_OVERHEAD
    return total


@dataclass
class TxSfv:
    """Encoder-side record of one transmitted SFV."""
    label: int
    step: float
    all_zero: bool
    n_blocks: int
    covered: int                 # blocks carried by packets
    indices: np.ndarray          # what the encoder quantized (n_blocks, 64)
    packets: list = field(default_factory=list)
    info_bits: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint8))

    @property
    def symbols_used(self) -> int:
        return (self.info_bits.size + TAIL) if self.info_bits.size else 0


def encode_sfv_digital(label: int, coeffs: np.ndarray, n_symbols: int,
                       payload_limit: int = DEFAULT_PAYLOAD_BITS) -> TxSfv:
    n_blocks = coeffs.shape[0]
    info_capacity = n_symbols - TAIL
    if info_capacity < PACKET_OVERHEAD:
        # too small for even one empty packet: nothing is transmitted
        return TxSfv(label, float(STEP_LADDER[-1]), True, n_blocks, 0,
                     np.zeros((n_blocks, 64), dtype=np.int64))
    step, all_zero = choose_step(coeffs, info_capacity, payload_limit)
    indices = np.zeros((n_blocks, 64), dtype=np.int64) if all_zero \
        else quantize(coeffs, step)
    block_bits = [encode_block(indices[b]) for b in range(n_blocks)]
    packets, covered = packetize(label, block_bits, payload_limit,
                                 info_capacity)
    info_bits = np.concatenate([p.bits() for p in packets]) if packets \
        else np.zeros(0, dtype=np.uint8)
    return TxSfv(label, step, all_zero, n_blocks, covered, indices,
                 packets, info_bits)


def decode_sfv_digital(info_bits: np.ndarray,
                       n_blocks: int) -> tuple[np.ndarray, np.ndarray]:
    """Info bits -> (indices (n_blocks, 64), per-block ok flags).

    Blocks not covered by a CRC-clean packet stay zero with ok=False; the
    mask is the complement of verified coverage, so a failed packet's
    untrusted header can never widen or misplace trusted content.
    """
    indices = np.zeros((n_blocks, 64), dtype=np.int64)
    ok = np.zeros(n_blocks, dtype=bool)
    packets, _ = depacketize(info_bits)
    for pkt in packets:
        if not pkt.ok:
            continue
        start = pkt.first_block
        if start >= n_blocks:
            continue
        decoded, clean = decode_blocks(BitReader(pkt.payload),
                                       n_blocks - start)
        indices[start:start + clean] = decoded[:clean]
        ok[start:start + clean] = True
    return indices, ok


def sfv_frame_symbols(info_bits: np.ndarray) -> np.ndarray:
    """Conv-code and modulate one SFV's packet stream."""
    coded = conv_encode(info_bits)
    return qpsk_modulate(coded)


def sfv_frame_decode(received: np.ndarray, gains: np.ndarray,
                     noise_var: float, n_info_bits: int) -> np.ndarray:
    llrs = qpsk_llr(received, gains, noise_var)
    llrs = llrs[:2 * (n_info_bits + TAIL)]
    return viterbi_decode(llrs)


# ---------------------------------------------------------------------------
# classical single-stream baseline

@dataclass
class TxBaseline:
    step: float
    all_zero: bool
    n_blocks: int
    covered: int
    indices: np.ndarray
    entropy_bits: np.ndarray   # payload region only (flip target)
    info_bits: np.ndarray      # entropy bits + 16-bit CRC

    @property
    def symbols_used(self) -> int:
        return self.info_bits.size + TAIL


def baseline_encode(coeffs: np.ndarray, budget_symbols: int) -> TxBaseline:
    """One stream over all blocks: uniform step, single CRC, no indices."""
    n_blocks = coeffs.shape[0]
    info_capacity = budget_symbols - TAIL - CRC_BITS
    if info_capacity < 0:
        raise ValueError("budget below the baseline framing overhead")
    chosen = None
    for step in STEP_LADDER:
        idx = quantize(coeffs, step)
        lengths = [block_bit_length(idx[b]) for b in range(n_blocks)]
        if sum(lengths) <= info_capacity:
            chosen = (float(step), False, idx, lengths)
            break
    if chosen is None:
        step = float(STEP_LADDER[-1])
        idx = np.zeros((n_blocks, 64), dtype=np.int64)
        lengths = [2] * n_blocks
        chosen = (step, True, idx, lengths)
    step, all_zero, indices, lengths = chosen
    covered = 0
    used = 0
    for ln in lengths:
        if used + ln > info_capacity:
            break
        used += ln
        covered += 1
    w = BitWriter()
    for b in range(covered):
        w.write_array(encode_block(indices[b]))
    entropy_bits = w.to_array()
    w.write_bits(crc16(entropy_bits), 16)
    info_bits = w.to_array()
    return TxBaseline(step, all_zero, n_blocks, covered, indices,
                      entropy_bits, info_bits)


def baseline_decode(info_bits: np.ndarray, n_blocks: int
                    ) -> tuple[np.ndarray, bool, int]:
    """Decode the single stream; desync zeroes everything behind it.

    Returns (indices, crc_ok, cleanly decoded block count).
    """
    if info_bits.size < CRC_BITS:
        return np.zeros((n_blocks, 64), dtype=np.int64), False, 0
    entropy_bits = info_bits[:-CRC_BITS]
    crc = BitReader(info_bits, info_bits.size - CRC_BITS).read_bits(16)
    crc_ok = crc16(entropy_bits) == crc
    indices, clean = decode_blocks(BitReader(entropy_bits), n_blocks)
    return indices, crc_ok, clean
