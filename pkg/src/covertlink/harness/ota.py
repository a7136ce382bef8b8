"""Synthetic "OTA-like" recordings standing in for real 40 MSPS captures.

Each recording is one MCS 7 packet, upsampled to 40 MSPS, passed through a
short exponentially decaying multipath channel with a carrier offset, and
buried in noise at an SNR drawn per recording. The packet is framed by a
little silence on each side like a triggered capture would be.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..channel import ChannelRealization, apply_channel, awgn_for_snr, exponential_taps
from ..ofdm import modulate
from ..ofdm.tx import octets_to_bits
from ..sigcore import ComplexBuffer, mean_power, resample, rng_for
from .iqfile import IqRecording, write_iq

OTA_DEFAULTS = {
    "n_recordings": 100,
    "sample_rate_hz": 40e6,
    "snr_db_min": 29.0,
    "snr_db_max": 31.0,
    "cfo_hz_max": 40e3,
    "n_taps_min": 2,
    "n_taps_max": 4,
    "decay_db_per_tap": 3.0,
    "tap_spacing": 2,  # samples at the recording rate
}

LEAD_S = 2e-6
TAIL_S = 4e-6


def random_psdu(rng: np.random.Generator, octets: int) -> np.ndarray:
    """Random payload ending in a CRC-32 frame check sequence, as bits."""
    if octets < 5:
        raise ValueError("PSDU needs at least one payload octet plus the 4-octet FCS")
    body = rng.integers(0, 256, octets - 4, dtype=np.uint8).tobytes()
    fcs = zlib.crc32(body).to_bytes(4, "little")
    return octets_to_bits(np.frombuffer(body + fcs, dtype=np.uint8))


@dataclass
class OtaTruth:
    psdu_bits: np.ndarray
    snr_db: float
    cfo_hz: float
    taps: np.ndarray
    packet_start: int  # at the recording rate


def synth_ota_recording(rng: np.random.Generator, mcs=7, psdu_octets: int = 1000,
                        params: dict | None = None) -> tuple[IqRecording, OtaTruth]:
    p = {**OTA_DEFAULTS, **(params or {})}
    fs = float(p["sample_rate_hz"])
    bits = random_psdu(rng, psdu_octets)
    pkt = modulate(bits, mcs).samples
    lead = int(round(LEAD_S * pkt.sample_rate_hz))
    tail = int(round(TAIL_S * pkt.sample_rate_hz))
    framed = ComplexBuffer(np.r_[np.zeros(lead), pkt.samples, np.zeros(tail)], pkt.sample_rate_hz)
    up = resample(framed, fs)
    n_taps = int(rng.integers(p["n_taps_min"], p["n_taps_max"] + 1))
    taps = exponential_taps(rng, n_taps, p["decay_db_per_tap"], spacing=int(p["tap_spacing"]))
    cfo_hz = float(rng.uniform(-p["cfo_hz_max"], p["cfo_hz_max"]))
    ch = ChannelRealization.from_hz(cfo_hz, fs, taps=taps, cfo_phi=float(rng.uniform(0, 2 * np.pi)))
    y = apply_channel(up, ch)
    scale = fs / pkt.sample_rate_hz
    start = int(round(lead * scale))
    body = y.samples[start : start + int(round(len(pkt) * scale))]
    lo, hi = p["snr_db_min"], p["snr_db_max"]
    snr_db = float(lo) if lo == hi else float(rng.uniform(lo, hi))
    y = awgn_for_snr(y, snr_db, rng, ref_power=mean_power(body))
    rec = IqRecording(y, 0.0, f"OTA-like MCS {int(mcs)} packet, {psdu_octets} octets",
                      {"mcs": int(mcs), "psdu_octets": int(psdu_octets)})
    return rec, OtaTruth(bits, snr_db, cfo_hz, taps, start)


def ota_recording_for(seed: int, index: int, mcs=7, psdu_octets: int = 1000,
                      params: dict | None = None):
    """Recording ``index`` of the corpus defined by ``seed``."""
    return synth_ota_recording(rng_for(seed, 0x07A, index), mcs, psdu_octets, params)


def write_ota_corpus(directory, n: int, seed: int = 0, mcs=7, psdu_octets: int = 1000,
                     params: dict | None = None) -> list[Path]:
    directory = Path(directory)
    paths = []
    for i in range(n):
        rec, truth = ota_recording_for(seed, i, mcs, psdu_octets, params)
        path = directory / f"ota_{i:04d}.iq"
        write_iq(path, rec.samples, center_freq_hz=rec.center_freq_hz,
                 description=rec.description, snr_db=round(truth.snr_db, 3),
                 cfo_hz=round(truth.cfo_hz, 1), **rec.metadata)
        paths.append(path)
    return paths
