"""Rate-1/2 K=7 convolutional code, soft Viterbi, QPSK, symbol channel.

Encoder convention: at each step the shift register is sr = (bit << 6) |
state, the two output bits are parity(sr & 0o171) and parity(sr & 0o133)
(interleaved g0 first), and the next state is sr >> 1. Frames are terminated
with 6 zero tail bits, so a k-bit message yields 2*(k+6) coded bits.

The Viterbi decoder is max-sum over LLRs (positive LLR means bit 0), batch
vectorized over frames of equal length; traceback starts from state 0.
"""

from __future__ import annotations

import numpy as np

G0 = 0o171
G1 = 0o133
K = 7
N_STATES = 64
TAIL = K - 1

_G0_TAPS = np.array([(G0 >> (6 - i)) & 1 for i in range(7)], dtype=np.int64)
_G1_TAPS = np.array([(G1 >> (6 - i)) & 1 for i in range(7)], dtype=np.int64)


def _parity(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> 4)
    x = x ^ (x >> 2)
    x = x ^ (x >> 1)
    return x & 1


def _build_tables() -> tuple[np.ndarray, ...]:
    states = np.arange(N_STATES)
    sr = (np.arange(2)[:, None] << 6) | states[None, :]   # (bit, state)
    out0 = _parity(sr & G0)
    out1 = _parity(sr & G1)
    nxt = sr >> 1
    prev_state = np.zeros((N_STATES, 2), dtype=np.int64)
    prev_bit = np.zeros((N_STATES, 2), dtype=np.int64)
    slot = np.zeros(N_STATES, dtype=np.int64)
    for s in range(N_STATES):
        for b in range(2):
            ns = nxt[b, s]
            prev_state[ns, slot[ns]] = s
            prev_bit[ns, slot[ns]] = b
            slot[ns] += 1
    # outputs emitted on the transition (prev_state, prev_bit) -> ns
    po0 = out0[prev_bit, prev_state]
    po1 = out1[prev_bit, prev_state]
    return prev_state, prev_bit, po0, po1


_PREV_STATE, _PREV_BIT, _PO0, _PO1 = _build_tables()
# branch gain sign: +llr/2 when the emitted bit is 0, -llr/2 when it is 1
_SIGN0 = 1.0 - 2.0 * _PO0
_SIGN1 = 1.0 - 2.0 * _PO1


def conv_encode(bits: np.ndarray) -> np.ndarray:
    """Terminated rate-1/2 encoding; returns 2*(len(bits)+6) coded bits."""
    msg = np.concatenate([np.asarray(bits, dtype=np.int64),
                          np.zeros(TAIL, dtype=np.int64)])
    c0 = np.convolve(msg, _G0_TAPS)[:msg.size] % 2
    c1 = np.convolve(msg, _G1_TAPS)[:msg.size] % 2
    out = np.empty(2 * msg.size, dtype=np.uint8)
    out[0::2] = c0
    out[1::2] = c1
    return out


def viterbi_decode_batch(llrs: np.ndarray) -> np.ndarray:
    """Soft max-sum Viterbi over frames (F, 2*(k+6)) -> info bits (F, k)."""
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    n_frames, n_llr = llrs.shape
    if n_llr % 2:
        raise ValueError("LLR count must be even")
    n_steps = n_llr // 2
    k = n_steps - TAIL
    if k < 0:
        raise ValueError("frame shorter than the tail")
    metric = np.full((n_frames, N_STATES), -np.inf)
    metric[:, 0] = 0.0
    choices = np.empty((n_steps, n_frames, N_STATES), dtype=np.uint8)
    for t in range(n_steps):
        l0 = llrs[:, 2 * t, None, None]
        l1 = llrs[:, 2 * t + 1, None, None]
        gain = _SIGN0 * (l0 / 2.0) + _SIGN1 * (l1 / 2.0)  # (F, 64, 2)
        cand = metric[:, _PREV_STATE] + gain
        pick = np.argmax(cand, axis=2)
        choices[t] = pick
        metric = np.take_along_axis(cand, pick[:, :, None], axis=2)[:, :, 0]
    bits = np.empty((n_frames, n_steps), dtype=np.uint8)
    state = np.zeros(n_frames, dtype=np.int64)  # traceback from the zero state
    frames = np.arange(n_frames)
    for t in range(n_steps - 1, -1, -1):
        pick = choices[t, frames, state]
        bits[:, t] = _PREV_BIT[state, pick]
        state = _PREV_STATE[state, pick]
    return bits[:, :k]


def viterbi_decode(llrs: np.ndarray) -> np.ndarray:
    """Single-frame soft Viterbi; llrs length 2*(k+6) -> k info bits."""
    return viterbi_decode_batch(llrs[None, :])[0]


# ---------------------------------------------------------------------------
# QPSK and the symbol-level channel

_SCALE = 1.0 / np.sqrt(2.0)


def qpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """Gray map (b0, b1) -> ((1-2*b0)/sqrt2, (1-2*b1)/sqrt2), Es = 1."""
    bits = np.asarray(bits, dtype=np.float64)
    if bits.size % 2:
        bits = np.concatenate([bits, [0.0]])  # pad one zero, recorded by caller
    re = (1.0 - 2.0 * bits[0::2]) * _SCALE
    im = (1.0 - 2.0 * bits[1::2]) * _SCALE
    return re + 1j * im


def qpsk_llr(received: np.ndarray, gains: np.ndarray,
             noise_var: float) -> np.ndarray:
    """Per-dimension LLRs, positive for bit 0; gains are per symbol."""
    g = np.broadcast_to(np.asarray(gains, dtype=np.float64), received.shape)
    scale = 4.0 * _SCALE / noise_var
    llrs = np.empty(2 * received.size)
    llrs[0::2] = scale * g * received.real
    llrs[1::2] = scale * g * received.imag
    return llrs


def transmit(symbols: np.ndarray, rb_ids: list[int], ch, n_re: int,
             rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Apply per-RB gain and AWGN; returns (received, per-symbol gains).

    Symbol k rides RB rb_ids[k // n_re]; the caller guarantees capacity.
    """
    n = symbols.size
    if n > len(rb_ids) * n_re:
        raise ValueError("symbols exceed assigned RB capacity")
    idx = np.asarray(rb_ids, dtype=np.int64)[np.arange(n) // n_re]
    g = ch.gains[idx]
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) \
        * np.sqrt(ch.noise_var / 2.0)
    return g * symbols + noise, g
