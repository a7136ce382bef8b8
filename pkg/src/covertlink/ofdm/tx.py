"""OFDM transmitter and the remodulator used for cancellation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sigcore import ComplexBuffer
from . import coding
from .params import (
    DATA_CARRIERS,
    FFT_SIZE,
    LTF_FREQ,
    LTF_GI,
    LTF_LEN,
    STF_FREQ,
    STF_LEN,
    Mcs,
    PILOT_CARRIERS,
    PILOT_VALUES,
    OfdmConfig,
    get_mcs,
    ofdm_time,
)

MAX_PSDU_OCTETS = 4095
SERVICE_BITS = 16
TAIL_BITS = 6
DEFAULT_SCRAMBLER_SEED = 0b1011101


def octets_to_bits(octets) -> np.ndarray:
    """LSB-first bit order, as transmitted."""
    return np.unpackbits(np.asarray(octets, dtype=np.uint8), bitorder="little")


def bits_to_octets(bits) -> np.ndarray:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little")


def n_data_symbols(psdu_octets: int, mcs) -> int:
    mcs = get_mcs(mcs)
    return -(-(SERVICE_BITS + 8 * psdu_octets + TAIL_BITS) // mcs.data_bits_per_symbol)


@dataclass
class OfdmPacket:
    """A modulated packet and everything needed to rebuild it.

    ``freq_symbols`` holds one 64-bin vector per symbol after the preamble
    (the SIGNAL symbol first when present, then the data symbols).
    """

    samples: ComplexBuffer
    psdu_bits: np.ndarray
    mcs: Mcs
    scrambler_seed: int
    freq_symbols: np.ndarray
    data_bits: np.ndarray  # scrambled, pre-encoder bits of the DATA field
    cfg: OfdmConfig

    @property
    def n_data_symbols(self) -> int:
        return self.freq_symbols.shape[0] - int(self.cfg.include_signal_field)

    @property
    def payload_start(self) -> int:
        return STF_LEN + LTF_LEN

    def __len__(self):
        return len(self.samples)


def _signal_field_bits(mcs: Mcs, length: int) -> np.ndarray:
    bits = np.zeros(24, dtype=np.uint8)
    bits[0:4] = mcs.rate_bits
    bits[5:17] = (length >> np.arange(12)) & 1
    bits[17] = bits[:17].sum() & 1
    return bits


def _symbols_to_bins(data_syms: np.ndarray, first_polarity_index: int) -> np.ndarray:
    """Place 48 data values per row plus pilots into 64-bin vectors."""
    n = data_syms.shape[0]
    freq = np.zeros((n, FFT_SIZE), dtype=np.complex128)
    freq[:, DATA_CARRIERS % FFT_SIZE] = data_syms
    pol = coding.pilot_polarity(first_polarity_index + n)[first_polarity_index:]
    freq[:, PILOT_CARRIERS % FFT_SIZE] = pol[:, None] * PILOT_VALUES[None, :]
    return freq


def encode_data_field(psdu_bits, mcs: Mcs, scrambler_seed: int):
    """Scrambled DATA-field bits and the resulting 48-column symbol rows."""
    psdu_bits = np.asarray(psdu_bits, dtype=np.uint8)
    n_sym = -(-(SERVICE_BITS + psdu_bits.size + TAIL_BITS) // mcs.data_bits_per_symbol)
    n_data = n_sym * mcs.data_bits_per_symbol
    raw = np.zeros(n_data, dtype=np.uint8)
    raw[SERVICE_BITS : SERVICE_BITS + psdu_bits.size] = psdu_bits
    scrambled = raw ^ coding.scrambler_sequence(scrambler_seed, n_data)
    tail = SERVICE_BITS + psdu_bits.size
    scrambled[tail : tail + TAIL_BITS] = 0
    return scrambled, scrambled_to_symbols(scrambled, mcs)


def scrambled_to_symbols(scrambled_bits, mcs: Mcs) -> np.ndarray:
    coded = coding.puncture(coding.conv_encode(scrambled_bits), mcs.code_rate)
    inter = coding.interleave(coded, mcs.coded_bits_per_symbol, mcs.bits_per_subcarrier)
    return coding.map_bits(inter, mcs.bits_per_subcarrier).reshape(-1, 48)


def _signal_symbol(mcs: Mcs, length: int) -> np.ndarray:
    coded = coding.conv_encode(_signal_field_bits(mcs, length))
    inter = coding.interleave(coded, 48, 1)
    return _symbols_to_bins(coding.map_bits(inter, 1).reshape(1, 48), 0)


def synthesize(freq_symbols, cfg: OfdmConfig, channel=None, backoff: int = 0,
               include_preamble: bool = True) -> np.ndarray:
    """Time-domain packet from per-symbol frequency vectors.

    ``channel`` (64 complex gains) multiplies every symbol's bins, including
    the training symbols, before the IFFT; each segment is then the cyclic
    extension of its 64-sample body. With ``backoff`` the body is taken to
    start that many samples before the end of the cyclic prefix, matching a
    receiver whose FFT window sits early by the same amount.
    """
    freq_symbols = np.atleast_2d(np.asarray(freq_symbols, dtype=np.complex128))
    gain = 1.0 if channel is None else np.asarray(channel)
    parts = []
    if include_preamble:
        stf_body = ofdm_time(STF_FREQ * gain)
        ltf_body = ofdm_time(LTF_FREQ * gain)
        parts.append(stf_body[(np.arange(STF_LEN) + backoff) % FFT_SIZE])
        parts.append(ltf_body[(np.arange(LTF_LEN) - LTF_GI + backoff) % FFT_SIZE])
    if freq_symbols.shape[0]:
        bodies = ofdm_time(freq_symbols * gain)
        idx = (np.arange(cfg.symbol_len) - cfg.cp_len + backoff) % FFT_SIZE
        parts.append(bodies[:, idx].ravel())
    if not parts:
        return np.zeros(0, dtype=np.complex128)
    return np.concatenate(parts)


def modulate(psdu_bits, mcs, cfg: OfdmConfig | None = None,
             scrambler_seed: int = DEFAULT_SCRAMBLER_SEED) -> OfdmPacket:
    """Build a complete packet: preamble, SIGNAL symbol, DATA symbols."""
    cfg = cfg or OfdmConfig()
    mcs = get_mcs(mcs)
    psdu_bits = np.asarray(psdu_bits, dtype=np.uint8).ravel()
    if psdu_bits.size % 8:
        raise ValueError("PSDU must be a whole number of octets")
    if psdu_bits.size // 8 > MAX_PSDU_OCTETS:
        raise ValueError(f"PSDU of {psdu_bits.size // 8} octets exceeds {MAX_PSDU_OCTETS}")
    scrambled, data_syms = encode_data_field(psdu_bits, mcs, scrambler_seed)
    first_pol = 1 if cfg.include_signal_field else 0
    freq = _symbols_to_bins(data_syms, first_pol)
    if cfg.include_signal_field:
        freq = np.vstack([_signal_symbol(mcs, psdu_bits.size // 8), freq])
    samples = synthesize(freq, cfg)
    return OfdmPacket(
        samples=ComplexBuffer(samples, cfg.sample_rate_hz),
        psdu_bits=psdu_bits,
        mcs=mcs,
        scrambler_seed=scrambler_seed,
        freq_symbols=freq,
        data_bits=scrambled,
        cfg=cfg,
    )


def remodulate_packet(psdu_bits, mcs, cfg: OfdmConfig | None = None,
                      scrambler_seed: int = DEFAULT_SCRAMBLER_SEED) -> OfdmPacket:
    """The receiver-side copy of the transmitter; no windowing is applied."""
    return modulate(psdu_bits, mcs, cfg, scrambler_seed)


def remodulate(psdu_bits, mcs, cfg: OfdmConfig | None = None,
               scrambler_seed: int = DEFAULT_SCRAMBLER_SEED) -> ComplexBuffer:
    return remodulate_packet(psdu_bits, mcs, cfg, scrambler_seed).samples


def packet_from_scrambled(scrambled_bits, mcs, psdu_octets: int, cfg: OfdmConfig | None = None,
                          scrambler_seed: int = DEFAULT_SCRAMBLER_SEED) -> OfdmPacket:
    """Rebuild a packet straight from decoded, still-scrambled DATA bits.

    The covert receiver never needs the plaintext: it re-encodes exactly the
    bit stream it decoded.
    """
    cfg = cfg or OfdmConfig()
    mcs = get_mcs(mcs)
    scrambled = np.asarray(scrambled_bits, dtype=np.uint8)
    freq = _symbols_to_bins(scrambled_to_symbols(scrambled, mcs), 1 if cfg.include_signal_field else 0)
    if cfg.include_signal_field:
        freq = np.vstack([_signal_symbol(mcs, psdu_octets), freq])
    descr = scrambled ^ coding.scrambler_sequence(scrambler_seed, scrambled.size)
    psdu = descr[SERVICE_BITS : SERVICE_BITS + 8 * psdu_octets]
    return OfdmPacket(ComplexBuffer(synthesize(freq, cfg), cfg.sample_rate_hz), psdu, mcs,
                      scrambler_seed, freq, scrambled, cfg)
