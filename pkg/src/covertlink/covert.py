"""The hidden DSSS signal: BPSK at 156.25 kbaud spread by 64 chips at 10 Mcps.

At 20 MSPS each chip lasts two samples and each covert bit 128 samples
(6.4 us). The waveform sits at DC with no frequency shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sigcore import ComplexBuffer, SpreadingCode, as_samples, build_spreading_code, mean_power

PREAMBLE_SAMPLES = 320


@dataclass
class CovertConfig:
    code: SpreadingCode = field(default_factory=build_spreading_code)
    chip_rate_hz: float = 10e6
    sample_rate_hz: float = 20e6
    sir_db: float = 35.0
    # samples into the OFDM packet; default skips the STF/LTF preamble
    start_offset: int = PREAMBLE_SAMPLES

    def __post_init__(self):
        spc = self.sample_rate_hz / self.chip_rate_hz
        if spc != int(spc) or spc < 1:
            raise ValueError("sample rate must be an integer multiple of the chip rate")

    @property
    def samples_per_chip(self) -> int:
        return int(self.sample_rate_hz // self.chip_rate_hz)

    @property
    def chips_per_symbol(self) -> int:
        return self.code.length

    @property
    def samples_per_symbol(self) -> int:
        return self.samples_per_chip * self.chips_per_symbol

    @property
    def symbol_rate_baud(self) -> float:
        return self.chip_rate_hz / self.chips_per_symbol

    @property
    def symbol_duration_s(self) -> float:
        return 1.0 / self.symbol_rate_baud

    def chip_waveform(self) -> np.ndarray:
        """One symbol's worth of samples for bit 0 (+1 polarity)."""
        return np.repeat(self.code.chips, self.samples_per_chip)


@dataclass
class CovertFrame:
    bits: np.ndarray
    waveform: ComplexBuffer

    def __len__(self):
        return len(self.waveform)


def covert_modulate(bits, cfg: CovertConfig | None = None, amplitude: float = 1.0) -> CovertFrame:
    """Spread ``bits`` (0 -> +1, 1 -> -1) with the code, rectangular chips."""
    cfg = cfg or CovertConfig()
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size == 0:
        raise ValueError("covert frame needs at least one bit")
    symbols = 1.0 - 2.0 * bits
    wave = amplitude * (symbols[:, None] * cfg.chip_waveform()[None, :]).ravel()
    return CovertFrame(bits, ComplexBuffer(wave.astype(np.complex128), cfg.sample_rate_hz))


def capacity(packet_duration_s: float, cfg: CovertConfig | None = None) -> int:
    """Covert bits that fit after ``start_offset`` inside a packet."""
    cfg = cfg or CovertConfig()
    if packet_duration_s <= 0:
        raise ValueError("packet duration must be positive")
    usable = packet_duration_s - cfg.start_offset / cfg.sample_rate_hz
    # tolerate float error at exact multiples
    return max(int(np.floor(usable / cfg.symbol_duration_s + 1e-9)), 0)


def capacity_samples(n_samples: int, cfg: CovertConfig | None = None) -> int:
    cfg = cfg or CovertConfig()
    return max((n_samples - cfg.start_offset) // cfg.samples_per_symbol, 0)


def inject(ofdm, frame: CovertFrame, sir_db: float, start: int = PREAMBLE_SAMPLES,
           return_scaled: bool = False):
    """Add ``frame`` to ``ofdm`` at ``start`` with the requested SIR.

    SIR is measured over the overlap window only. Samples outside the window
    are untouched. ``sir_db = inf`` returns an unchanged copy.
    """
    x = as_samples(ofdm).copy()
    w = as_samples(frame.waveform)
    if start < 0 or start + w.size > x.size:
        raise ValueError(f"covert frame of {w.size} samples at {start} does not fit in {x.size}")
    if sir_db == float("inf"):
        scaled = np.zeros_like(w)
    else:
        p_ofdm = mean_power(x[start : start + w.size])
        p_cov = mean_power(w)
        scaled = w * np.sqrt(p_ofdm / p_cov / 10 ** (sir_db / 10))
        x[start : start + w.size] += scaled
    out = ofdm.with_samples(x) if isinstance(ofdm, ComplexBuffer) else x
    if return_scaled:
        return out, scaled
    return out


def despread(x, cfg: CovertConfig, n_bits: int, start: int = 0) -> np.ndarray:
    """Correlator outputs, one per covert symbol (real part is the decision variable)."""
    x = as_samples(x)
    n = n_bits * cfg.samples_per_symbol
    if start < 0 or x.size < start + n:
        raise ValueError(f"need {n} samples from {start}, buffer has {x.size}")
    seg = x[start : start + n].reshape(n_bits, cfg.chips_per_symbol, cfg.samples_per_chip)
    chips = seg.sum(axis=2)  # integrate over each chip
    return chips @ cfg.code.chips


def covert_demodulate(x, cfg: CovertConfig | None = None, n_bits: int = 1, start: int = 0):
    """Despread and sign-detect; returns ``(bits, soft_metrics)``."""
    cfg = cfg or CovertConfig()
    soft = despread(x, cfg, n_bits, start)
    bits = (soft.real < 0).astype(np.uint8)
    return bits, soft
