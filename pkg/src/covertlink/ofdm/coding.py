"""Bit-level processing of the 802.11 OFDM data path.

Scrambler, K=7 convolutional code (133/171 octal) with puncturing, the
two-step block interleaver, Gray QAM mapping and soft demapping, and a
soft-decision Viterbi decoder.
"""

from __future__ import annotations

from functools import lru_cache

import numba
import numpy as np

# ---------------------------------------------------------------- scrambler


@lru_cache(maxsize=128)
def _scrambler_period(seed: int) -> np.ndarray:
    state = [(seed >> i) & 1 for i in range(7)]
    out = np.empty(127, dtype=np.uint8)
    for i in range(127):
        fb = state[3] ^ state[6]
        out[i] = fb
        state = [fb] + state[:6]
    out.flags.writeable = False
    return out


def scrambler_sequence(seed: int, n: int) -> np.ndarray:
    """Output of the x^7 + x^4 + 1 scrambler started from ``seed``.

    Bit ``i - 1`` of ``seed`` holds register cell x_i. ``seed = 127`` (all
    ones) produces 0000111011110010...
    """
    if not 0 < seed < 128:
        raise ValueError("scrambler seed must be in 1..127")
    return _scrambler_period(int(seed))[np.arange(n) % 127]


def scrambler_seed_from_output(first7) -> int:
    """Recover the initial register from the first seven scrambler outputs."""
    o = {i: int(b) & 1 for i, b in enumerate(first7[:7])}
    # o[n] = o[n-4] ^ o[n-7], run backwards to o[-1] .. o[-7]
    for n in range(6, -1, -1):
        o[n - 7] = o[n] ^ o[n - 4]
    seed = sum(o[-i] << (i - 1) for i in range(1, 8))
    if seed == 0:
        raise ValueError("scrambler prefix decodes to the all-zero state")
    return seed


def pilot_polarity(n: int) -> np.ndarray:
    """Pilot polarity p_0 .. p_{n-1} (+1/-1), cycling with period 127."""
    seq = 1.0 - 2.0 * scrambler_sequence(127, 127)
    return seq[np.arange(n) % 127]


# ------------------------------------------------------- convolutional code

G0_DELAYS = (0, 2, 3, 5, 6)  # 133 octal
G1_DELAYS = (0, 1, 2, 3, 6)  # 171 octal

PUNCTURE_PATTERNS = {
    (1, 2): np.array([1, 1], dtype=bool),
    (2, 3): np.array([1, 1, 1, 0], dtype=bool),
    (3, 4): np.array([1, 1, 1, 0, 0, 1], dtype=bool),
}


def _taps(delays):
    t = np.zeros(7, dtype=np.uint8)
    t[list(delays)] = 1
    return t


def conv_encode(bits) -> np.ndarray:
    """Rate-1/2 mother code output A0 B0 A1 B1 ..., encoder starts in state 0."""
    bits = np.asarray(bits, dtype=np.uint8)
    a = np.convolve(bits, _taps(G0_DELAYS))[: bits.size] & 1
    b = np.convolve(bits, _taps(G1_DELAYS))[: bits.size] & 1
    out = np.empty(2 * bits.size, dtype=np.uint8)
    out[0::2] = a
    out[1::2] = b
    return out


def _pattern_mask(code_rate, n_mother: int) -> np.ndarray:
    pattern = PUNCTURE_PATTERNS[tuple(code_rate)]
    reps = -(-n_mother // pattern.size)
    return np.tile(pattern, reps)[:n_mother]


def puncture(coded, code_rate) -> np.ndarray:
    coded = np.asarray(coded)
    return coded[_pattern_mask(code_rate, coded.size)]


def depuncture(values, code_rate, n_mother: int) -> np.ndarray:
    """Put received soft values back on the mother-code grid, zeros elsewhere."""
    mask = _pattern_mask(code_rate, n_mother)
    if int(mask.sum()) != len(values):
        raise ValueError("punctured length does not match mother-code length")
    out = np.zeros(n_mother, dtype=np.float64)
    out[mask] = values
    return out


# ------------------------------------------------------------- interleaver


@lru_cache(maxsize=None)
def interleaver_permutation(n_cbps: int, n_bpsc: int) -> np.ndarray:
    """``perm[k]`` is the output position of coded bit ``k`` within a symbol."""
    s = max(n_bpsc // 2, 1)
    k = np.arange(n_cbps)
    i = (n_cbps // 16) * (k % 16) + k // 16
    j = s * (i // s) + (i + n_cbps - (16 * i) // n_cbps) % s
    return j


def interleave(bits, n_cbps: int, n_bpsc: int) -> np.ndarray:
    blocks = np.asarray(bits).reshape(-1, n_cbps)
    out = np.empty_like(blocks)
    out[:, interleaver_permutation(n_cbps, n_bpsc)] = blocks
    return out.ravel()


def deinterleave(values, n_cbps: int, n_bpsc: int) -> np.ndarray:
    blocks = np.asarray(values).reshape(-1, n_cbps)
    return blocks[:, interleaver_permutation(n_cbps, n_bpsc)].ravel()


# ----------------------------------------------------------------- mapping

# Gray-coded PAM levels per axis, indexed by the axis bits read MSB first
_PAM = {
    1: np.array([-1.0, 1.0]),
    2: np.array([-3.0, -1.0, 3.0, 1.0]),  # 00 01 10 11
    3: np.array([-7.0, -5.0, -1.0, -3.0, 7.0, 5.0, 1.0, 3.0]),  # 000 001 010 011 100 101 110 111
}
_KMOD = {1: 1.0, 2: 1 / np.sqrt(2), 4: 1 / np.sqrt(10), 6: 1 / np.sqrt(42)}


def map_bits(bits, n_bpsc: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    if n_bpsc == 1:
        return _PAM[1][bits].astype(np.complex128)
    half = n_bpsc // 2
    groups = bits.reshape(-1, n_bpsc)
    weights = 1 << np.arange(half - 1, -1, -1)
    i_idx = groups[:, :half] @ weights
    q_idx = groups[:, half:] @ weights
    return _KMOD[n_bpsc] * (_PAM[half][i_idx] + 1j * _PAM[half][q_idx])


def _axis_llrs(y: np.ndarray, half: int) -> list[np.ndarray]:
    # piecewise-linear max-log approximations, positive favours bit 1
    if half == 1:
        return [y]
    if half == 2:
        return [y, 2.0 - np.abs(y)]
    return [y, 4.0 - np.abs(y), 2.0 - np.abs(np.abs(y) - 4.0)]


def demap_soft(symbols, n_bpsc: int, weights=None) -> np.ndarray:
    """Soft bit metrics for equalized symbols; positive means bit 1.

    ``weights`` (same shape as ``symbols``) scales each symbol's metrics,
    typically by |H|^2 so faded subcarriers count for less.
    """
    z = np.asarray(symbols, dtype=np.complex128) / _KMOD[n_bpsc]
    w = 1.0 if weights is None else np.asarray(weights, dtype=np.float64)
    if n_bpsc == 1:
        return (z.real * w).ravel()
    half = n_bpsc // 2
    cols = _axis_llrs(z.real, half) + _axis_llrs(z.imag, half)
    return (np.stack(cols, axis=-1) * np.asarray(w)[..., None]).ravel()


def hard_bits(symbols, n_bpsc: int) -> np.ndarray:
    return (demap_soft(symbols, n_bpsc) > 0).astype(np.uint8)


# ------------------------------------------------------------------ Viterbi


def _trellis():
    outputs = np.zeros((64, 2, 2), dtype=np.float64)
    for s in range(64):
        for b in range(2):
            reg = [b] + [(s >> (5 - i)) & 1 for i in range(6)]  # delays 0..6
            a = sum(reg[d] for d in G0_DELAYS) & 1
            c = sum(reg[d] for d in G1_DELAYS) & 1
            outputs[s, b] = (2 * a - 1, 2 * c - 1)
    return outputs


# state = last six inputs, most recent in bit 5
_OUT_SIGN = _trellis()


@numba.njit(cache=True)
def _viterbi_kernel(metrics, out_sign):
    n = metrics.shape[0]
    neg = -1e300
    pm = np.full(64, neg)
    pm[0] = 0.0
    new = np.empty(64)
    dec = np.zeros((n, 64), dtype=np.uint8)
    for t in range(n):
        ma = metrics[t, 0]
        mb = metrics[t, 1]
        for ns in range(64):
            b = ns >> 5
            p0 = (ns << 1) & 63
            p1 = p0 | 1
            c0 = pm[p0] + out_sign[p0, b, 0] * ma + out_sign[p0, b, 1] * mb
            c1 = pm[p1] + out_sign[p1, b, 0] * ma + out_sign[p1, b, 1] * mb
            if c1 > c0:
                new[ns] = c1
                dec[t, ns] = 1
            else:
                new[ns] = c0
        best = new.max()
        for s in range(64):
            pm[s] = new[s] - best
    s = 0
    best = pm[0]
    for k in range(1, 64):
        if pm[k] > best:
            best = pm[k]
            s = k
    bits = np.empty(n, dtype=np.uint8)
    for t in range(n - 1, -1, -1):
        bits[t] = s >> 5
        s = ((s << 1) & 63) | dec[t, s]
    return bits


def viterbi_decode(soft) -> np.ndarray:
    """Decode mother-code soft values (A0 B0 A1 B1 ...; positive = bit 1).

    Erased (punctured) positions carry 0. Hard bits can be passed as
    ``2*bits - 1``.
    """
    soft = np.asarray(soft, dtype=np.float64)
    if soft.size % 2:
        raise ValueError("mother-code stream must have even length")
    return _viterbi_kernel(soft.reshape(-1, 2), _OUT_SIGN)
