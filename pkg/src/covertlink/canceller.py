"""Covert receiver with OFDM cancellation.

Demodulate the OFDM packet, rebuild it from the decoded bits, put the
estimated channel, CFO and pilot-tracked phase back on, match its power and
phase to the received samples, subtract, and despread what is left.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covert import CovertConfig, covert_demodulate
from .ofdm.params import FFT_SIZE, PREAMBLE_LEN, OfdmConfig, ofdm_freq
from .ofdm.rx import RxEstimates, demodulate
from .ofdm.tx import OfdmPacket, packet_from_scrambled, synthesize
from .sigcore import ComplexBuffer, as_samples, mean_power

MODES = ("forward", "inverse")
METHODS = ("per_bin", "convolve")
SINGULAR_FLOOR = 1e-6


@dataclass
class CancellationReport:
    suppression_db: float
    ofdm_bit_errors: int | None = None
    scale_applied: float = 1.0
    phase_applied: float = 0.0
    mode: str = "forward"
    detected: bool = True
    degraded: bool = False


def refine_scale_phase(r, s_model) -> tuple[float, float]:
    """Power match and a single phase rotation of the model onto ``r``.

    scale = sqrt(P_r / P_model); phase = angle(sum r * conj(model)).
    """
    r = as_samples(r)
    m = as_samples(s_model)
    if r.size != m.size or r.size == 0:
        raise ValueError("refinement needs equal, nonempty extents")
    pm = mean_power(m)
    if pm == 0:
        raise ValueError("model has zero power")
    scale = float(np.sqrt(mean_power(r) / pm))
    phase = float(np.angle(np.vdot(m, r)))
    return scale, phase


def _payload_freq(s_hat, cfg: OfdmConfig) -> np.ndarray:
    """Per-symbol 64-bin vectors of everything after the preamble."""
    if isinstance(s_hat, OfdmPacket):
        return s_hat.freq_symbols
    x = as_samples(s_hat)
    n_sym, rem = divmod(x.size - PREAMBLE_LEN, cfg.symbol_len)
    if rem or n_sym < 0:
        raise ValueError("remodulated signal is not preamble + whole OFDM symbols")
    idx = PREAMBLE_LEN + cfg.symbol_len * np.arange(n_sym)[:, None] + cfg.cp_len + np.arange(FFT_SIZE)
    return ofdm_freq(x[idx]) if n_sym else np.zeros((0, FFT_SIZE), dtype=np.complex128)


def _centered_response(gains: np.ndarray) -> tuple[np.ndarray, int]:
    """64-tap impulse response of per-bin gains, delays -32..31."""
    h = np.fft.ifft(gains)
    return np.roll(h, FFT_SIZE // 2), FFT_SIZE // 2


def _filter(x: np.ndarray, gains: np.ndarray) -> np.ndarray:
    h, lead = _centered_response(gains)
    return np.convolve(x, h)[lead : lead + x.size]


def _symbol_phase_ramp(est: RxEstimates, n_payload: int, cfg: OfdmConfig) -> np.ndarray:
    """Per-sample common phase from pilot tracking (zero over the preamble)."""
    ph = np.zeros(PREAMBLE_LEN + n_payload * cfg.symbol_len)
    if n_payload:
        phases = np.zeros(n_payload)
        k = min(n_payload, est.symbol_phases.size)
        phases[:k] = est.symbol_phases[:k]
        ph[PREAMBLE_LEN:] = np.repeat(phases, cfg.symbol_len)
    return ph


def reimpair(s_hat, est: RxEstimates, cfg: OfdmConfig | None = None,
             method: str = "per_bin") -> np.ndarray:
    """Lambda_hat H_hat s_hat over the packet extent (no power/phase refinement).

    ``per_bin`` multiplies each symbol's bins by H_hat and rebuilds the
    cyclic prefix from the body; ``convolve`` filters the whole waveform with
    the 64-tap response of H_hat, which also reproduces spill-over between
    symbols when H_hat describes a real channel shorter than the prefix.
    """
    cfg = cfg or OfdmConfig()
    if est.channel is None:
        raise ValueError("estimates carry no channel")
    freq = _payload_freq(s_hat, cfg)
    if method == "per_bin":
        model = synthesize(freq, cfg, channel=est.channel)
    elif method == "convolve":
        base = as_samples(s_hat.samples if isinstance(s_hat, OfdmPacket) else s_hat)
        model = _filter(base, est.channel)
    else:
        raise ValueError(f"unknown method {method!r}")
    ph = _symbol_phase_ramp(est, freq.shape[0], cfg)
    return model * np.exp(1j * ph) * est.phasor(model.size, start=est.fine_timing)


def _window(window, start: int, stop: int) -> tuple[int, int]:
    if window is None:
        return start + PREAMBLE_LEN, stop
    lo, hi = int(window[0]), int(window[1])
    if not start <= lo < hi <= stop:
        raise ValueError(f"window {window} outside packet extent [{start}, {stop})")
    return lo, hi


def cancel_forward(r, est: RxEstimates, s_hat, cfg: OfdmConfig | None = None,
                   window=None, method: str = "per_bin", refine: bool = True):
    """u = r - Lambda_hat H_hat s_hat; receiver noise passes unfiltered.

    ``window`` (absolute sample indices) is where refinement and the
    suppression figure are computed; by default the packet after its
    preamble. Returns ``(residue, report)`` with the residue as long as ``r``.
    """
    cfg = cfg or OfdmConfig()
    x = as_samples(r)
    model = reimpair(s_hat, est, cfg, method)
    start = est.fine_timing
    stop = start + model.size
    if stop > x.size:
        raise ValueError(f"packet model ends at {stop}, past the {x.size}-sample buffer")
    lo, hi = _window(window, start, stop)
    scale, phase = 1.0, 0.0
    if refine:
        scale, phase = refine_scale_phase(x[lo:hi], model[lo - start : hi - start])
        model = model * (scale * np.exp(1j * phase))
    residue = x.copy()
    residue[start:stop] -= model
    report = CancellationReport(
        suppression_db=_ratio_db(residue[lo:hi], model[lo - start : hi - start]),
        scale_applied=scale,
        phase_applied=phase,
        mode="forward",
    )
    return _like(r, residue), report


def cancel_inverse(r, est: RxEstimates, s_hat, cfg: OfdmConfig | None = None,
                   window=None, refine: bool = True):
    """u = H_hat^-1 Lambda_hat^* r - s_hat; the inverse filter shapes the noise.

    Only the packet extent is equalized and cancelled; samples outside it are
    returned CFO-corrected.
    """
    cfg = cfg or OfdmConfig()
    if est.channel is None:
        raise ValueError("estimates carry no channel")
    h = np.asarray(est.channel)
    if np.min(np.abs(h)) < SINGULAR_FLOOR * np.max(np.abs(h)):
        raise ValueError("channel estimate has a near-zero bin; inverse is singular")
    x = as_samples(r)
    freq = _payload_freq(s_hat, cfg)
    model = synthesize(freq, cfg)
    model = model * np.exp(1j * _symbol_phase_ramp(est, freq.shape[0], cfg))
    start = est.fine_timing
    stop = start + model.size
    if stop > x.size:
        raise ValueError(f"packet model ends at {stop}, past the {x.size}-sample buffer")
    corrected = x * np.conj(est.phasor(x.size))
    corrected = _filter(corrected, 1.0 / h)
    lo, hi = _window(window, start, stop)
    scale, phase = 1.0, 0.0
    if refine:
        scale, phase = refine_scale_phase(corrected[lo:hi], model[lo - start : hi - start])
        model = model * (scale * np.exp(1j * phase))
    residue = corrected.copy()
    residue[start:stop] -= model
    report = CancellationReport(
        suppression_db=_ratio_db(residue[lo:hi], model[lo - start : hi - start]),
        scale_applied=scale,
        phase_applied=phase,
        mode="inverse",
    )
    return _like(r, residue), report


def _ratio_db(residue: np.ndarray, reference: np.ndarray) -> float:
    pr = mean_power(residue)
    if pr == 0:
        return float("-inf")
    return float(10 * np.log10(pr / mean_power(reference)))


def _like(template, samples):
    if isinstance(template, ComplexBuffer):
        return template.with_samples(samples)
    return samples


@dataclass
class CovertRecovery:
    bits: np.ndarray
    soft: np.ndarray
    report: CancellationReport
    residue: np.ndarray | None = None


def recover_covert(r, mcs, psdu_octets: int, n_bits: int, ofdm_cfg: OfdmConfig | None = None,
                   covert_cfg: CovertConfig | None = None, covert_start: int | None = None,
                   truth_psdu=None, mode: str = "forward", method: str = "per_bin") -> CovertRecovery:
    """Demodulate, remodulate, cancel, despread.

    ``covert_start`` is the absolute sample where the covert frame begins
    (timing is shared between covert transmitter and receiver); by default
    ``covert_cfg.start_offset`` after the detected packet start. When the
    OFDM packet is not detected the despreader runs on the raw samples and
    the report is flagged ``degraded``.
    """
    ofdm_cfg = ofdm_cfg or OfdmConfig()
    covert_cfg = covert_cfg or CovertConfig()
    x = as_samples(r)
    dem = demodulate(x, mcs, psdu_octets, ofdm_cfg)
    if not dem.detected:
        if covert_start is None:
            raise ValueError("no OFDM packet detected and no covert_start given")
        bits, soft = covert_demodulate(x, covert_cfg, n_bits, covert_start)
        report = CancellationReport(float("nan"), detected=False, degraded=True, mode=mode)
        return CovertRecovery(bits, soft, report, x)
    est = dem.estimates
    if covert_start is None:
        covert_start = est.fine_timing + covert_cfg.start_offset
    window = (covert_start, covert_start + n_bits * covert_cfg.samples_per_symbol)
    s_hat = packet_from_scrambled(dem.scrambled_bits, dem.mcs, psdu_octets, ofdm_cfg,
                                  dem.scrambler_seed)
    stop = est.fine_timing + len(s_hat)
    if stop > x.size:
        x = np.r_[x, np.zeros(stop - x.size, dtype=np.complex128)]
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if not est.fine_timing <= window[0] < window[1] <= stop:
        # covert frame not inside the detected packet: despread the raw samples
        bits, soft = covert_demodulate(x, covert_cfg, n_bits, covert_start)
        report = CancellationReport(float("nan"), detected=True, degraded=True, mode=mode)
        return CovertRecovery(bits, soft, report, x)
    if mode == "forward":
        residue, report = cancel_forward(x, est, s_hat, ofdm_cfg, window, method)
    else:
        residue, report = cancel_inverse(x, est, s_hat, ofdm_cfg, window)
    if truth_psdu is not None:
        report.ofdm_bit_errors = int(np.count_nonzero(dem.psdu_bits != np.asarray(truth_psdu)))
    bits, soft = covert_demodulate(residue, covert_cfg, n_bits, covert_start)
    return CovertRecovery(bits, soft, report, residue)
