"""Impairments between transmitter and receiver.

r = Lambda H s + n: multipath convolution, a CFO phase ramp, a delay and
circular complex Gaussian noise, applied in that order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sigcore import ComplexBuffer, as_samples, mean_power


@dataclass
class ChannelRealization:
    taps: np.ndarray = field(default_factory=lambda: np.array([1.0 + 0j]))
    cfo_omega: float = 0.0  # rad/sample
    cfo_phi: float = 0.0
    timing_offset: int = 0
    noise_power_db: float = float("-inf")  # relative to unit signal power

    def __post_init__(self):
        self.taps = np.atleast_1d(np.asarray(self.taps, dtype=np.complex128))
        if self.taps.size == 0 or self.taps[0] == 0:
            raise ValueError("taps must be nonempty with a nonzero main path")
        if self.timing_offset < 0:
            raise ValueError("timing_offset must be >= 0")

    @classmethod
    def from_hz(cls, cfo_hz: float = 0.0, sample_rate_hz: float = 20e6, **kw):
        return cls(cfo_omega=2 * np.pi * cfo_hz / sample_rate_hz, **kw)

    @property
    def is_identity(self) -> bool:
        return (self.taps.size == 1 and self.taps[0] == 1 and self.cfo_omega == 0
                and self.cfo_phi == 0 and self.timing_offset == 0
                and self.noise_power_db == float("-inf"))


def complex_noise(rng: np.random.Generator, n: int, power: float) -> np.ndarray:
    scale = np.sqrt(power / 2)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def apply_channel(s, ch: ChannelRealization, rng: np.random.Generator | None = None):
    """Return the received buffer, ``len(s) + len(taps) - 1 + timing_offset`` long."""
    x = as_samples(s)
    if x.size == 0:
        raise ValueError("empty input")
    y = np.convolve(x, ch.taps) if ch.taps.size > 1 or ch.taps[0] != 1 else x.copy()
    if ch.cfo_omega or ch.cfo_phi:
        y = y * np.exp(1j * (ch.cfo_omega * np.arange(y.size) + ch.cfo_phi))
    if ch.timing_offset:
        y = np.r_[np.zeros(ch.timing_offset, dtype=np.complex128), y]
    if np.isfinite(ch.noise_power_db):
        if rng is None:
            raise ValueError("noise requested without an rng")
        y = y + complex_noise(rng, y.size, 10 ** (ch.noise_power_db / 10))
    if isinstance(s, ComplexBuffer):
        return s.with_samples(y)
    return y


def awgn_for_snr(s, snr_db: float, rng: np.random.Generator, ref_power: float | None = None):
    """Add noise at ``snr_db`` below the signal power.

    Signal power is measured over ``s`` unless ``ref_power`` is given (used to
    keep SNR defined against the OFDM packet alone once a covert frame has
    been added).
    """
    x = as_samples(s)
    p = mean_power(x) if ref_power is None else float(ref_power)
    if p <= 0:
        raise ValueError("cannot set an SNR on a zero-power signal")
    if snr_db == float("inf"):
        y = x.copy()
    else:
        y = x + complex_noise(rng, x.size, p / 10 ** (snr_db / 10))
    if isinstance(s, ComplexBuffer):
        return s.with_samples(y)
    return y


def exponential_taps(rng: np.random.Generator, n_taps: int = 3, decay_db_per_tap: float = 3.0,
                     spacing: int = 1) -> np.ndarray:
    """Unit-energy multipath with exponentially decaying power and random phases."""
    powers = 10 ** (-decay_db_per_tap * np.arange(n_taps) / 10)
    powers /= powers.sum()
    taps = np.zeros((n_taps - 1) * spacing + 1, dtype=np.complex128)
    taps[::spacing] = np.sqrt(powers) * np.exp(2j * np.pi * rng.random(n_taps))
    # keep the main path on the real axis; absolute phase is part of the CFO phase
    taps *= np.exp(-1j * np.angle(taps[0]))
    return taps
