"""OFDM receiver: detection, CFO and timing, channel estimation, decoding."""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..sigcore import ComplexBuffer, as_samples
from . import coding
from .params import (
    DATA_CARRIERS,
    FFT_SIZE,
    LTF_BODY,
    LTF_FREQ,
    LTF_GI,
    OCCUPIED_CARRIERS,
    PILOT_CARRIERS,
    PILOT_VALUES,
    PREAMBLE_LEN,
    STF_LEN,
    OfdmConfig,
    get_mcs,
    ofdm_freq,
)
from .tx import SERVICE_BITS, bits_to_octets, n_data_symbols

log = logging.getLogger(__name__)

STF_PERIOD = 16
DETECT_WINDOW = 48
DETECT_THRESHOLD = 0.5
DETECT_MIN_RUN = 32
LTF1_OFFSET = 192  # first full LTF body relative to packet start
FINE_SEARCH = 80


@dataclass
class RxEstimates:
    """Synchronization and channel estimates for one packet.

    ``cfo_omega`` is in rad/sample and the phasor ramp is referenced to
    ``fine_timing``: Lambda[n] = exp(j(cfo_omega*(n - fine_timing) + cfo_phi)).
    The channel is referenced to the nominal FFT window, so an ideal channel
    estimates to 1 on every bin.
    """

    coarse_timing: int
    fine_timing: int
    cfo_omega: float
    cfo_phi: float = 0.0
    channel: np.ndarray | None = None
    snr_db: float = float("nan")
    # common phase per payload symbol from pilot tracking
    symbol_phases: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def phasor(self, n_samples: int, start: int = 0) -> np.ndarray:
        """exp(j(omega*k + phi)) for absolute sample indices start..start+n-1."""
        k = np.arange(start, start + n_samples) - self.fine_timing
        return np.exp(1j * (self.cfo_omega * k + self.cfo_phi))

    @property
    def cfo_hz(self) -> float:
        return self.cfo_omega * 20e6 / (2 * np.pi)


def _sliding_sum(x: np.ndarray, w: int) -> np.ndarray:
    c = np.concatenate([[0], np.cumsum(x)])
    return c[w:] - c[:-w]


def stf_metric(r: np.ndarray):
    """Delay-and-correlate metric over the 16-sample STF period.

    Returns ``(metric, P)``; ``metric`` is |P|^2 / R^2 and P is the lagged
    autocorrelation whose angle gives 16 times the CFO.
    """
    if r.size < DETECT_WINDOW + STF_PERIOD:
        return np.zeros(0), np.zeros(0, dtype=complex)
    prod = r[STF_PERIOD:] * np.conj(r[:-STF_PERIOD])
    p = _sliding_sum(prod, DETECT_WINDOW)
    e = _sliding_sum(np.abs(r[STF_PERIOD:]) ** 2, DETECT_WINDOW)
    with np.errstate(invalid="ignore", divide="ignore"):
        metric = np.where(e > 0, np.abs(p) ** 2 / np.maximum(e, 1e-300) ** 2, 0.0)
    return metric, p


def detect_and_sync(r, cfg: OfdmConfig | None = None, threshold: float = DETECT_THRESHOLD,
                    search_from: int = 0) -> RxEstimates | None:
    """Find the first packet at or after ``search_from``.

    STF autocorrelation gives detection, coarse timing and a coarse CFO; a
    cross-correlation against the known LTF body refines timing and the two
    LTF repetitions refine the CFO. Returns ``None`` when nothing crosses the
    threshold.
    """
    cfg = cfg or OfdmConfig()
    r = as_samples(r)
    metric, p = stf_metric(r[search_from:])
    above = metric > threshold
    if not above.any():
        return None
    # first run of DETECT_MIN_RUN samples above threshold
    run = _sliding_sum(above.astype(np.int64), DETECT_MIN_RUN)
    hits = np.flatnonzero(run == DETECT_MIN_RUN)
    if hits.size == 0:
        return None
    coarse = int(hits[0]) + search_from
    plateau = p[hits[0] : hits[0] + DETECT_MIN_RUN].sum()
    omega_coarse = float(np.angle(plateau)) / STF_PERIOD

    # fine timing: both LTF bodies must line up
    lo = max(coarse + LTF1_OFFSET - FINE_SEARCH, 0)
    hi = coarse + LTF1_OFFSET + FINE_SEARCH
    need = hi + 2 * FFT_SIZE
    seg = r[lo : min(need, r.size)]
    if seg.size < 2 * FFT_SIZE + 1:
        return None
    seg = seg * np.exp(-1j * omega_coarse * np.arange(lo, lo + seg.size))
    c = np.correlate(seg, LTF_BODY, mode="valid")
    score = np.abs(c[:-FFT_SIZE]) ** 2 + np.abs(c[FFT_SIZE:]) ** 2
    ltf1 = lo + int(np.argmax(score))
    start = ltf1 - LTF1_OFFSET
    if start < 0 or ltf1 + 2 * FFT_SIZE > r.size:
        return None

    # fine CFO from the lag-64 repeats in the LTF (late guard half plus both
    # bodies) and the STF (16-periodic, so 64-periodic too); the first 16
    # samples of each field are skipped since channel memory smears the
    # preceding field into them
    skip = STF_PERIOD
    pairs = [(ltf1 - LTF_GI + skip, LTF_GI - skip + FFT_SIZE),
             (start + skip, STF_LEN - skip - FFT_SIZE)]
    acc = 0j
    for first, n in pairs:
        acc += np.vdot(r[first : first + n], r[first + FFT_SIZE : first + FFT_SIZE + n])
    fine = float(np.angle(acc * np.exp(-1j * omega_coarse * FFT_SIZE)))
    omega = omega_coarse + fine / FFT_SIZE
    return RxEstimates(coarse_timing=coarse, fine_timing=start, cfo_omega=omega)


def correct_cfo(r, est: RxEstimates) -> np.ndarray:
    """Multiply by the conjugate phasor ramp."""
    r = as_samples(r)
    return r * np.conj(est.phasor(r.size))


def _window_fft(r_sync: np.ndarray, start: int, cfg: OfdmConfig) -> np.ndarray:
    """FFT of a 64-sample window opened ``fft_backoff`` samples before ``start``.

    The early window is rotated back so the result refers to ``start``.
    """
    b = cfg.fft_backoff
    seg = r_sync[start - b : start - b + FFT_SIZE]
    if seg.size < FFT_SIZE:
        seg = np.r_[seg, np.zeros(FFT_SIZE - seg.size)]
    k = np.fft.fftfreq(FFT_SIZE, 1 / FFT_SIZE)
    return ofdm_freq(seg) * np.exp(2j * np.pi * k * b / FFT_SIZE)


def interpolate_nulls(h_occupied: np.ndarray) -> np.ndarray:
    """Fill a 64-bin response from values on the 52 occupied subcarriers.

    ``h_occupied`` is ordered as ``OCCUPIED_CARRIERS`` (k = -26..-1, 1..26).
    Nulls, DC included, are filled by linear interpolation of magnitude and
    unwrapped phase; the band-edge nulls interpolate across the wrap from
    k = 26 to k = -26 + 64.
    """
    k = OCCUPIED_CARRIERS.astype(float)
    mag = np.abs(h_occupied)
    ph = np.unwrap(np.angle(h_occupied))
    # wrap point k = 38 is k = -26 seen from above
    ph_wrap = ph[0] + 2 * np.pi * np.round((ph[-1] - ph[0]) / (2 * np.pi))
    kk = np.r_[k, 38.0]
    mm = np.r_[mag, mag[0]]
    pp = np.r_[ph, ph_wrap]
    targets = np.arange(-26, 38)
    h = np.interp(targets, kk, mm) * np.exp(1j * np.interp(targets, kk, pp))
    out = np.empty(FFT_SIZE, dtype=np.complex128)
    out[targets % FFT_SIZE] = h
    out[OCCUPIED_CARRIERS % FFT_SIZE] = h_occupied
    return out


def estimate_channel(r_sync, est: RxEstimates, cfg: OfdmConfig | None = None) -> RxEstimates:
    """Least-squares channel estimate from the two LTF bodies.

    ``r_sync`` must already be CFO-corrected; indices are absolute, with the
    packet starting at ``est.fine_timing``.
    """
    cfg = cfg or OfdmConfig()
    r_sync = as_samples(r_sync)
    t1 = est.fine_timing + LTF1_OFFSET
    y1 = _window_fft(r_sync, t1, cfg)
    y2 = _window_fft(r_sync, t1 + FFT_SIZE, cfg)
    occ = OCCUPIED_CARRIERS % FFT_SIZE
    ref = LTF_FREQ[occ]
    h_occ = 0.5 * (y1[occ] + y2[occ]) / ref
    noise = np.mean(np.abs(y1[occ] - y2[occ]) ** 2) / 2
    sig = np.mean(np.abs(h_occ) ** 2) - noise / 2
    est.channel = interpolate_nulls(h_occ)
    with np.errstate(divide="ignore"):
        est.snr_db = float(10 * np.log10(max(sig, 1e-30) / noise)) if noise > 0 else float("inf")
    return est


@dataclass
class DemodResult:
    detected: bool
    psdu_bits: np.ndarray | None = None
    estimates: RxEstimates | None = None
    packet_ok: bool = False
    scrambled_bits: np.ndarray | None = None
    scrambler_seed: int | None = None
    mcs: object = None
    psdu_octets: int = 0
    equalized: np.ndarray | None = None


def fcs_ok(psdu_bits) -> bool:
    """True when the last four octets are the CRC-32 of the rest."""
    octets = bits_to_octets(psdu_bits).tobytes()
    if len(octets) < 4:
        return False
    return zlib.crc32(octets[:-4]).to_bytes(4, "little") == octets[-4:]


def demodulate(r, mcs, psdu_octets: int, cfg: OfdmConfig | None = None, expected_bits=None,
               est: RxEstimates | None = None, soft: bool | None = None) -> DemodResult:
    """Full receive chain for one packet.

    MCS and length are known out of band; the SIGNAL symbol is skipped.
    ``packet_ok`` compares against ``expected_bits`` when given, otherwise
    checks a trailing CRC-32.
    """
    cfg = cfg or OfdmConfig()
    mcs = get_mcs(mcs)
    r = as_samples(r)
    if est is None:
        est = detect_and_sync(r, cfg)
    if est is None:
        return DemodResult(detected=False, mcs=mcs, psdu_octets=psdu_octets)
    r_sync = correct_cfo(r, est)
    estimate_channel(r_sync, est, cfg)

    n_data = n_data_symbols(psdu_octets, mcs)
    n_sig = int(cfg.include_signal_field)
    n_total = n_data + n_sig
    starts = est.fine_timing + PREAMBLE_LEN + cfg.symbol_len * np.arange(n_total) + cfg.cp_len
    need = int(starts[-1]) + FFT_SIZE
    if need > r_sync.size:
        r_sync = np.r_[r_sync, np.zeros(need - r_sync.size)]
    b = cfg.fft_backoff
    idx = (starts - b)[:, None] + np.arange(FFT_SIZE)[None, :]
    k = np.fft.fftfreq(FFT_SIZE, 1 / FFT_SIZE)
    y = ofdm_freq(r_sync[idx]) * np.exp(2j * np.pi * k * b / FFT_SIZE)[None, :]

    h = est.channel
    eq = y / h[None, :]
    pil = PILOT_CARRIERS % FFT_SIZE
    pol = coding.pilot_polarity(n_total)
    ref = pol[:, None] * PILOT_VALUES[None, :]
    w_p = np.abs(h[pil]) ** 2
    phases = np.angle(np.sum(eq[:, pil] * np.conj(ref) * w_p[None, :], axis=1))
    eq = eq * np.exp(-1j * phases)[:, None]
    est.symbol_phases = phases

    dat = DATA_CARRIERS % FFT_SIZE
    data_syms = eq[n_sig:, dat]
    weights = np.broadcast_to(np.abs(h[dat]) ** 2, data_syms.shape)
    metrics = coding.demap_soft(data_syms, mcs.bits_per_subcarrier, weights)
    if not (cfg.soft_decision if soft is None else soft):
        metrics = np.sign(metrics)
    metrics = coding.deinterleave(metrics, mcs.coded_bits_per_symbol, mcs.bits_per_subcarrier)
    n_bits = n_data * mcs.data_bits_per_symbol
    mother = coding.depuncture(metrics, mcs.code_rate, 2 * n_bits)
    scrambled = coding.viterbi_decode(mother)

    try:
        seed = coding.scrambler_seed_from_output(scrambled[:7])
    except ValueError:
        seed = 127
    descr = scrambled ^ coding.scrambler_sequence(seed, scrambled.size)
    psdu = descr[SERVICE_BITS : SERVICE_BITS + 8 * psdu_octets]
    if expected_bits is not None:
        ok = bool(np.array_equal(psdu, np.asarray(expected_bits, dtype=np.uint8)))
    else:
        ok = fcs_ok(psdu)
    return DemodResult(
        detected=True,
        psdu_bits=psdu,
        estimates=est,
        packet_ok=ok,
        scrambled_bits=scrambled,
        scrambler_seed=seed,
        mcs=mcs,
        psdu_octets=psdu_octets,
        equalized=eq,
    )


def demodulate_buffer(r: ComplexBuffer, mcs, psdu_octets: int, cfg: OfdmConfig | None = None, **kw):
    if abs(r.sample_rate_hz - (cfg or OfdmConfig()).sample_rate_hz) > 1e-6:
        raise ValueError("receiver expects 20 MSPS input; resample first")
    return demodulate(r.samples, mcs, psdu_octets, cfg, **kw)
