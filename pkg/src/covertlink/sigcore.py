"""Signal primitives shared by every other module.

Sample buffers, PN sequences, correlation, power and PSD measurement,
rational resampling and seeded random streams.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import signal

#: Sentinel returned by :func:`measure_power_db` for an all-zero buffer.
NEG_INF_DB = float("-inf")


@dataclass
class ComplexBuffer:
    """Complex baseband samples tagged with their sample rate."""

    samples: np.ndarray
    sample_rate_hz: float = 20e6

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128).ravel()
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples) -> "ComplexBuffer":
        return ComplexBuffer(samples, self.sample_rate_hz)


def as_samples(x) -> np.ndarray:
    """Return the complex sample array behind a buffer or array-like."""
    if isinstance(x, ComplexBuffer):
        return x.samples
    return np.asarray(x, dtype=np.complex128).ravel()


@dataclass(frozen=True)
class SpreadingCode:
    chips: np.ndarray

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=np.float64)
        if not np.all(np.abs(chips) == 1.0):
            raise ValueError("chips must be +1 or -1")
        object.__setattr__(self, "chips", chips)

    @property
    def length(self) -> int:
        return self.chips.size

    def __len__(self):
        return self.chips.size


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Generator whose stream depends only on ``seed`` and ``keys``.

    Trials use ``rng_for(experiment_seed, point_index, trial_index)`` so any
    trial can be replayed on its own, in any order.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *map(int, keys)]))


def lfsr_sequence(taps: Sequence[int], init_state: Sequence[int], n: int) -> np.ndarray:
    """First ``n`` output bits of a Fibonacci LFSR.

    ``taps`` lists the exponents of the feedback polynomial, e.g. ``(6, 1, 0)``
    for z^6 + z + 1. The register is written left to right as in
    ``init_state``; the rightmost cell is the output and the cell holding the
    coefficient of z^e sits at index ``degree - 1 - e``.
    """
    taps = sorted(set(int(t) for t in taps), reverse=True)
    degree = taps[0]
    state = [int(b) & 1 for b in init_state]
    if len(state) != degree:
        raise ValueError(f"init_state must have {degree} cells")
    if not any(state):
        raise ValueError("all-zero LFSR state never leaves zero")
    if n < 1:
        raise ValueError("n must be >= 1")
    cells = [degree - 1 - e for e in taps[1:]]
    out = np.empty(n, dtype=np.uint8)
    for i in range(n):
        out[i] = state[-1]
        fb = 0
        for c in cells:
            fb ^= state[c]
        state = [fb] + state[:-1]
    return out


def aperiodic_acf(chips) -> np.ndarray:
    c = np.asarray(chips, dtype=np.float64)
    return np.correlate(c, c, mode="full")


def pslr_db(chips) -> float:
    """Peak side-lobe ratio of the aperiodic autocorrelation, in dB."""
    acf = np.abs(aperiodic_acf(chips))
    mid = acf.size // 2
    side = np.delete(acf, mid).max()
    return float(20 * np.log10(acf[mid] / side))


CODE_POLY = (6, 1, 0)
CODE_INIT = (0, 0, 0, 0, 0, 1)
CODE_LENGTH = 64


def build_spreading_code(extension: str = "continue", init_state=CODE_INIT) -> SpreadingCode:
    """The 64-chip covert spreading code.

    The z^6+z+1 m-sequence has period 63. ``"continue"`` takes 64 consecutive
    register outputs; ``"repeat"`` appends the first chip again. Both give the
    same chips for this seed, and a peak side-lobe ratio of 20.56 dB.
    Bits map 0 -> +1, 1 -> -1. Another ``init_state`` gives a shifted code,
    which a receiver holding the default code cannot despread.
    """
    if extension == "continue":
        bits = lfsr_sequence(CODE_POLY, init_state, CODE_LENGTH)
    elif extension == "repeat":
        bits = lfsr_sequence(CODE_POLY, init_state, CODE_LENGTH - 1)
        bits = np.r_[bits, bits[0]]
    else:
        raise ValueError(f"unknown extension {extension!r}")
    return SpreadingCode(1.0 - 2.0 * bits)


def xcorr(a, b) -> np.ndarray:
    """Full aperiodic cross-correlation c[l] = sum_n a[n + l] conj(b[n]).

    Output index ``i`` holds lag ``i - (len(b) - 1)``, so lags run from
    ``-(len(b) - 1)`` to ``len(a) - 1``.
    """
    a = as_samples(a)
    b = as_samples(b)
    if a.size == 0 or b.size == 0:
        raise ValueError("xcorr needs nonempty inputs")
    return signal.correlate(a, b, mode="full", method="auto")


def xcorr_lags(len_a: int, len_b: int) -> np.ndarray:
    return np.arange(-(len_b - 1), len_a)


def mean_power(x) -> float:
    x = as_samples(x)
    if x.size == 0:
        raise ValueError("power of an empty buffer is undefined")
    return float(np.mean(x.real**2 + x.imag**2))


def measure_power_db(x) -> float:
    """10 log10 of mean |x|^2; ``-inf`` for an all-zero buffer."""
    p = mean_power(x)
    if p == 0.0:
        return NEG_INF_DB
    return float(10 * np.log10(p))


def psd_estimate(x, nfft: int = 256, overlap: float = 0.5, sample_rate_hz: float | None = None):
    """Welch PSD with a Hann window.

    Returns ``(freqs_hz, psd_db)`` with frequencies ascending (DC in the
    middle). Each value is power per bin, so the linear bins sum to the mean
    sample power.
    """
    fs = sample_rate_hz or (x.sample_rate_hz if isinstance(x, ComplexBuffer) else 1.0)
    samples = as_samples(x)
    if nfft > samples.size:
        raise ValueError(f"nfft={nfft} exceeds buffer length {samples.size}")
    if not 0 <= overlap < 1:
        raise ValueError("overlap must be in [0, 1)")
    f, pxx = signal.welch(
        samples,
        fs=fs,
        window="hann",
        nperseg=nfft,
        noverlap=int(round(overlap * nfft)),
        return_onesided=False,
        scaling="density",
        detrend=False,
    )
    per_bin = np.fft.fftshift(pxx) * fs / nfft
    with np.errstate(divide="ignore"):
        return np.fft.fftshift(f), 10 * np.log10(per_bin)


_MAX_RATIO_TERM = 64


def _ratio(fs_in: float, fs_out: float) -> Fraction:
    ratio = Fraction(fs_out / fs_in).limit_denominator(1000)
    if abs(float(ratio) - fs_out / fs_in) > 1e-9 * (fs_out / fs_in):
        raise ValueError(f"rate ratio {fs_out}/{fs_in} is not a small rational")
    if ratio.numerator > _MAX_RATIO_TERM or ratio.denominator > _MAX_RATIO_TERM:
        raise ValueError(f"rate ratio {ratio} has terms above {_MAX_RATIO_TERM}")
    return ratio


def resampling_filter(up: int, down: int, atten_db: float = 80.0) -> np.ndarray:
    """Kaiser lowpass for a polyphase ``up/down`` resampler.

    Passband edge at 0.40625 and stopband edge at 0.59375 of the lower of the
    two sample rates (8.125 MHz and 11.875 MHz for a 20 MSPS side).
    """
    # the lower rate is 1/max(up, down) of the filter's own rate
    scale = 1.0 / max(up, down)
    width_nyq = (0.59375 - 0.40625) * scale * 2
    numtaps, beta = signal.kaiserord(atten_db, width_nyq)
    numtaps |= 1
    cutoff = 0.5 * scale
    # unity DC gain; resample_poly applies the factor of ``up`` itself
    return signal.firwin(numtaps, cutoff, window=("kaiser", beta), fs=1.0)


def resample(x: ComplexBuffer, target_rate_hz: float) -> ComplexBuffer:
    """Rational polyphase resampling with delay compensation."""
    ratio = _ratio(x.sample_rate_hz, target_rate_hz)
    up, down = ratio.numerator, ratio.denominator
    if up == down:
        return x.with_samples(x.samples.copy())
    h = resampling_filter(up, down)
    y = signal.resample_poly(x.samples, up, down, window=h)
    return ComplexBuffer(y, float(target_rate_hz))
