"""802.11a/g OFDM numerology, rate table and training sequences."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FFT_SIZE = 64
CP_LEN = 16
SAMPLE_RATE_HZ = 20e6

# logical subcarrier index k in -26..26; FFT bin is k mod 64
PILOT_CARRIERS = np.array([-21, -7, 7, 21])
PILOT_VALUES = np.array([1.0, 1.0, 1.0, -1.0])
DATA_CARRIERS = np.array([k for k in range(-26, 27) if k != 0 and k not in (-21, -7, 7, 21)])
OCCUPIED_CARRIERS = np.array([k for k in range(-26, 27) if k != 0])

# time-domain scale so an occupied symbol has unit mean sample power
TIME_SCALE = FFT_SIZE / np.sqrt(OCCUPIED_CARRIERS.size)

_S = np.sqrt(13 / 6) * np.array(
    [0, 0, 1 + 1j, 0, 0, 0, -1 - 1j, 0, 0, 0, 1 + 1j, 0, 0, 0, -1 - 1j, 0, 0, 0, -1 - 1j, 0, 0, 0,
     1 + 1j, 0, 0, 0, 0, 0, 0, 0, -1 - 1j, 0, 0, 0, -1 - 1j, 0, 0, 0, 1 + 1j, 0, 0, 0, 1 + 1j, 0, 0,
     0, 1 + 1j, 0, 0, 0, 1 + 1j, 0, 0]
)
_L = np.array(
    [1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0,
     1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1],
    dtype=np.complex128,
)


def to_bins(values_m26_to_26) -> np.ndarray:
    """Place 53 values for k = -26..26 into a 64-bin FFT vector."""
    x = np.zeros(FFT_SIZE, dtype=np.complex128)
    x[np.arange(-26, 27) % FFT_SIZE] = values_m26_to_26
    return x


STF_FREQ = to_bins(_S)
LTF_FREQ = to_bins(_L)


def ofdm_time(freq_bins: np.ndarray) -> np.ndarray:
    """IFFT along the last axis with the packet power scaling."""
    return np.fft.ifft(freq_bins, axis=-1) * TIME_SCALE


def ofdm_freq(time_samples: np.ndarray) -> np.ndarray:
    return np.fft.fft(time_samples, axis=-1) / TIME_SCALE


STF_BODY = ofdm_time(STF_FREQ)  # 16-periodic
LTF_BODY = ofdm_time(LTF_FREQ)
STF_LEN = 160
LTF_LEN = 160
LTF_GI = 32
PREAMBLE_LEN = STF_LEN + LTF_LEN


def preamble() -> np.ndarray:
    stf = np.tile(STF_BODY, 3)[:STF_LEN]
    ltf = np.r_[LTF_BODY[-LTF_GI:], LTF_BODY, LTF_BODY]
    return np.r_[stf, ltf]


@dataclass(frozen=True)
class Mcs:
    index: int
    constellation: str
    bits_per_subcarrier: int
    code_rate: tuple[int, int]
    rate_bits: tuple[int, int, int, int]
    sensitivity_snr_db: float

    @property
    def coded_bits_per_symbol(self) -> int:
        return 48 * self.bits_per_subcarrier

    @property
    def data_bits_per_symbol(self) -> int:
        num, den = self.code_rate
        return self.coded_bits_per_symbol * num // den


# sensitivity SNR: minimum input sensitivity (-82 ... -65 dBm) against a
# -101 dBm 20 MHz noise floor plus 10 dB noise figure
MCS_TABLE = {
    0: Mcs(0, "BPSK", 1, (1, 2), (1, 1, 0, 1), 9.0),
    1: Mcs(1, "BPSK", 1, (3, 4), (1, 1, 1, 1), 10.0),
    2: Mcs(2, "QPSK", 2, (1, 2), (0, 1, 0, 1), 12.0),
    3: Mcs(3, "QPSK", 2, (3, 4), (0, 1, 1, 1), 14.0),
    4: Mcs(4, "16QAM", 4, (1, 2), (1, 0, 0, 1), 17.0),
    5: Mcs(5, "16QAM", 4, (3, 4), (1, 0, 1, 1), 21.0),
    6: Mcs(6, "64QAM", 6, (2, 3), (0, 0, 0, 1), 25.0),
    7: Mcs(7, "64QAM", 6, (3, 4), (0, 0, 1, 1), 26.0),
}


def get_mcs(mcs) -> Mcs:
    if isinstance(mcs, Mcs):
        return mcs
    try:
        return MCS_TABLE[int(mcs)]
    except (KeyError, ValueError, TypeError):
        raise ValueError(f"invalid MCS {mcs!r}; expected 0-7") from None


@dataclass(frozen=True)
class OfdmConfig:
    fft_size: int = FFT_SIZE
    cp_len: int = CP_LEN
    sample_rate_hz: float = SAMPLE_RATE_HZ
    data_carriers: np.ndarray = field(default_factory=lambda: DATA_CARRIERS.copy(), compare=False)
    pilot_carriers: np.ndarray = field(default_factory=lambda: PILOT_CARRIERS.copy(), compare=False)
    # FFT window starts this many samples early inside the cyclic prefix
    fft_backoff: int = 2
    include_signal_field: bool = True
    # hard decisions by default; soft (LLR) metrics are optional
    soft_decision: bool = False

    def __post_init__(self):
        if self.fft_size != FFT_SIZE or self.cp_len != CP_LEN:
            raise ValueError("only the 64-point, 16-sample CP numerology is supported")

    @property
    def symbol_len(self) -> int:
        return self.fft_size + self.cp_len

    @property
    def symbol_duration_s(self) -> float:
        return self.symbol_len / self.sample_rate_hz

    @property
    def null_carriers(self) -> np.ndarray:
        used = set(self.data_carriers.tolist()) | set(self.pilot_carriers.tolist())
        return np.array([k for k in range(-32, 32) if k not in used])

    def bins(self, carriers) -> np.ndarray:
        return np.asarray(carriers) % self.fft_size
