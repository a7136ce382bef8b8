"""Transmit spectral mask check.

The buffer is interpolated up (default 4x, so 80 MSPS for a 20 MSPS packet)
to make the +-30 MHz mask corners visible, its Welch PSD is normalized to
the peak (0 dBr), and the margin to the piecewise-linear mask is reported for
the segment starting at each breakpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sigcore import ComplexBuffer, psd_estimate, resample
from .spec import DEFAULT_MASK

OCCUPIED_HZ = 8.125e6
DC_FLAG_DB = -6.0  # DC within 6 dB of the occupied average counts as raised


@dataclass
class MaskResult:
    passed: bool
    margins_db: list[tuple[float, float]]  # (breakpoint MHz, min margin over its segment)
    dc_delta_db: float
    dc_raised: bool
    freqs_hz: np.ndarray
    psd_dbr: np.ndarray
    peak_psd_db: float = float("nan")

    @property
    def min_margin_db(self) -> float:
        return min(m for _, m in self.margins_db)


def mask_limit(freqs_hz, breakpoints=DEFAULT_MASK) -> np.ndarray:
    """dBr limit at each frequency; flat inside the first and past the last breakpoint."""
    bp = np.asarray(breakpoints, dtype=float)
    if bp.ndim != 2 or bp.shape[1] != 2 or np.any(np.diff(bp[:, 0]) <= 0):
        raise ValueError("breakpoints must be increasing (MHz, dBr) pairs")
    off = np.abs(np.asarray(freqs_hz)) / 1e6
    return np.interp(off, bp[:, 0], bp[:, 1])


def _ensemble_psd(x, nfft, oversample):
    bufs = list(x) if isinstance(x, (list, tuple)) else [x]
    if not bufs:
        raise ValueError("no buffers to check")
    acc = None
    for b in bufs:
        if not isinstance(b, ComplexBuffer):
            b = ComplexBuffer(np.asarray(b, dtype=np.complex128))
        if oversample > 1:
            b = resample(b, b.sample_rate_hz * oversample)
        fs = b.sample_rate_hz
        nfft = nfft or int(2 ** np.ceil(np.log2(fs / 78.125e3)))
        if len(b) < 4 * nfft:
            raise ValueError(f"buffer of {len(b)} samples is too short for a {nfft}-point PSD")
        f, psd = psd_estimate(b, nfft=nfft, overlap=0.5)
        lin = 10 ** (psd / 10)
        acc = lin if acc is None else acc + lin
    with np.errstate(divide="ignore"):
        return f, 10 * np.log10(acc / len(bufs)), fs, nfft


def check_spectral_mask(x: ComplexBuffer, breakpoints=DEFAULT_MASK, nfft: int | None = None,
                        oversample: int = 4, reference_db: float | None = None) -> MaskResult:
    """Mask margins of ``x``.

    ``x`` may also be a list of buffers (an ensemble of packets), in which
    case their PSDs are averaged; that washes out the random cross terms
    between OFDM and covert that dominate any single short packet.

    0 dBr is the PSD peak unless ``reference_db`` (a per-bin PSD level in
    dB, e.g. ``peak_psd_db`` of the clean packets) anchors it elsewhere.
    """
    f, psd, fs, nfft = _ensemble_psd(x, nfft, oversample)
    psd_dbr = psd - (np.max(psd) if reference_db is None else reference_db)
    limit = mask_limit(f, breakpoints)
    margin = limit - psd_dbr

    bp_mhz = [float(b[0]) for b in breakpoints]
    edges = bp_mhz + [np.inf]
    off = np.abs(f) / 1e6
    margins = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (off >= lo) & (off < hi)
        if np.any(sel):
            margins.append((lo, float(np.min(margin[sel]))))
    if not margins:
        raise ValueError("no PSD bins beyond the first breakpoint; raise oversample")

    occ = (np.abs(f) <= OCCUPIED_HZ) & (np.abs(f) >= 2 * fs / nfft)
    dc = int(np.argmin(np.abs(f)))
    occ_avg_db = 10 * np.log10(np.mean(10 ** (psd_dbr[occ] / 10)))
    dc_delta = float(psd_dbr[dc] - occ_avg_db)
    # inside the first breakpoint the limit is the reference itself
    skirt = off >= bp_mhz[0]
    passed = bool(np.all(margin[skirt] >= 0))
    return MaskResult(passed, margins, dc_delta, dc_delta > DC_FLAG_DB, f, psd_dbr, float(np.max(psd)))
