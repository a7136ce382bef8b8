"""Monte-Carlo runners for the PER, covert BER, OTA replay and mask experiments.

Every trial draws its randomness from ``rng_for(seed, kind, curve, point,
trial)``, so a trial can be replayed alone and the aggregate does not depend
on execution order or on the number of worker processes.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..canceller import recover_covert
from ..channel import ChannelRealization, apply_channel, awgn_for_snr, exponential_taps
from ..covert import CovertConfig, capacity_samples, covert_demodulate, covert_modulate, inject
from ..ofdm import OfdmConfig, demodulate, detect_and_sync, modulate, n_data_symbols
from ..ofdm.params import PREAMBLE_LEN
from ..sigcore import resample, rng_for
from .iqfile import IqRecording, read_iq
from .mask import check_spectral_mask
from .ota import OTA_DEFAULTS, ota_recording_for, random_psdu
from .spec import DEFAULT_MASK, ExperimentSpec
from .stats import Curve, CurvePoint, TrialRecord

log = logging.getLogger(__name__)

LEAD = 80  # silence before each simulated packet
TAIL = 80
_KIND_KEY = {"baseline_per": 1, "per_vs_sir": 2, "covert_ber_nocancel": 3,
             "covert_ber_cancel": 4, "ota_replay": 5, "mask_check": 6}
THREADS_ENV = "COVERTLINK_THREADS"


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    curves: list[Curve]
    reports: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def worker_count(requested: int = 1) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = max(int(requested), 1)
    if cap:
        try:
            n = min(n, max(int(cap), 1))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, cap)
    return n


def _map(fn, jobs, workers: int):
    workers = worker_count(workers)
    if workers == 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    chunk = max(1, len(jobs) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=chunk))


def _grid_key(value) -> int:
    """Nonnegative integer naming a grid value (None means no noise)."""
    if value is None or not math.isfinite(value):
        return 2**32 - 1
    return int(round((float(value) + 1000.0) * 1000))


def _ofdm_cfg(spec: ExperimentSpec) -> OfdmConfig:
    return OfdmConfig(soft_decision=spec.decoder == "soft")


def _realization(spec: ExperimentSpec, rng: np.random.Generator) -> ChannelRealization | None:
    ch = spec.channel
    if not ch:
        return None
    if "taps" in ch:
        taps = np.array([complex(re, im) for re, im in ch["taps"]])
    elif "multipath" in ch:
        mp = ch["multipath"]
        n = int(rng.integers(mp.get("n_taps_min", 3), mp.get("n_taps_max", 3) + 1))
        taps = exponential_taps(rng, n, mp.get("decay_db_per_tap", 3.0), mp.get("spacing", 1))
    else:
        taps = np.array([1.0 + 0j])
    cfo = ch.get("cfo_hz", 0.0)
    if ch.get("cfo_hz_max"):
        cfo = float(rng.uniform(-ch["cfo_hz_max"], ch["cfo_hz_max"]))
    phi = float(rng.uniform(0, 2 * np.pi)) if cfo else 0.0
    return ChannelRealization.from_hz(cfo, 20e6, taps=taps, cfo_phi=phi,
                                      timing_offset=int(ch.get("timing_offset", 0)))


def _simulated_packet(spec: ExperimentSpec, mcs: int, snr_db, sir_db, rng):
    """One received buffer: packet (+ covert) through the channel plus noise.

    Returns (received, psdu_bits, covert_bits, covert_start).
    """
    bits = random_psdu(rng, spec.psdu_octets)
    pkt = modulate(bits, mcs).samples.samples
    x = np.r_[np.zeros(LEAD), pkt, np.zeros(TAIL)]
    ch = _realization(spec, rng)
    delay = LEAD
    if ch is not None:
        x = apply_channel(x, ch)
        delay += ch.timing_offset
    # SNR is set against the OFDM packet alone, over its own extent
    ref = np.sum(np.abs(x[delay : delay + pkt.size]) ** 2) / pkt.size
    ccfg = CovertConfig(start_offset=spec.covert_start_offset)
    covert_bits = None
    start = delay + spec.covert_start_offset
    if sir_db is not None:
        n_bits = capacity_samples(pkt.size, ccfg)
        covert_bits = rng.integers(0, 2, n_bits).astype(np.uint8)
        if n_bits:
            x = inject(x, covert_modulate(covert_bits, ccfg), sir_db, start)
    if snr_db is not None and math.isfinite(snr_db):
        x = awgn_for_snr(x, snr_db, rng, ref_power=ref)
    return x, bits, covert_bits, start


# -- trial functions (top level so worker processes can pickle them) --------

def _per_trial(job) -> TrialRecord:
    spec, key, mcs, snr_db, sir_db, t = job
    rng = rng_for(spec.seed, *key, t)
    x, bits, _, _ = _simulated_packet(spec, mcs, snr_db, sir_db, rng)
    dem = demodulate(x, mcs, spec.psdu_octets, _ofdm_cfg(spec), expected_bits=bits)
    bit_errors = int(np.count_nonzero(dem.psdu_bits != bits)) if dem.detected else None
    return TrialRecord(t, int(not dem.packet_ok), 1, detected=True, ofdm_bit_errors=bit_errors,
                       extra={"detected": dem.detected})


def _covert_trial(job) -> TrialRecord:
    spec, key, mcs, snr_db, sir_db, t, cancel = job
    rng = rng_for(spec.seed, *key, t)
    x, bits, cbits, start = _simulated_packet(spec, mcs, snr_db, sir_db, rng)
    n = cbits.size
    if n == 0:
        return TrialRecord(t, 0, 0)
    ccfg = CovertConfig(start_offset=spec.covert_start_offset)
    if not cancel:
        got, _ = covert_demodulate(x, ccfg, n, start)
        return TrialRecord(t, int(np.count_nonzero(got != cbits)), n)
    rec = recover_covert(x, mcs, spec.psdu_octets, n, _ofdm_cfg(spec), ccfg, covert_start=start,
                         truth_psdu=bits, mode=spec.cancel_mode, method=spec.cancel_method)
    rep = rec.report
    return TrialRecord(t, int(np.count_nonzero(rec.bits != cbits)), n, detected=rep.detected,
                       suppression_db=rep.suppression_db, ofdm_bit_errors=rep.ofdm_bit_errors,
                       extra={"degraded": rep.degraded})


def _snr_curves(spec: ExperimentSpec):
    """(label, snr) pairs: optional no-noise curve first, then the SNR grid."""
    out = [("no noise", None)] if spec.noiseless else []
    return out + [(f"SNR {s:g} dB", float(s)) for s in spec.snr_db]


def run_baseline_per(spec: ExperimentSpec) -> ExperimentResult:
    kk = _KIND_KEY["baseline_per"]
    jobs, index = [], []
    for ci, mcs in enumerate(spec.mcs):
        for pi, snr in enumerate(spec.snr_db):
            for t in range(spec.packets_per_point):
                jobs.append((spec, (kk, mcs, _grid_key(snr)), mcs, float(snr), None, t))
                index.append((ci, pi))
    recs = _map(_per_trial, jobs, spec.workers)
    curves = []
    for ci, mcs in enumerate(spec.mcs):
        pts = []
        for pi, snr in enumerate(spec.snr_db):
            rs = [r for r, ix in zip(recs, index) if ix == (ci, pi)]
            pts.append(CurvePoint.from_records(spec.name, float(snr), rs, mcs=mcs, snr_db=float(snr)))
        curves.append(Curve(f"MCS {mcs}", pts))
    return ExperimentResult(spec, curves)


def _sir_sweep(spec: ExperimentSpec, kind: str, trial_fn, extra=()):
    kk = _KIND_KEY[kind]
    mcs = spec.mcs[0]
    snrs = _snr_curves(spec)
    jobs, index = [], []
    for ci, (_, snr) in enumerate(snrs):
        for pi, sir in enumerate(spec.sir_db):
            for t in range(spec.packets_per_point):
                key = (kk, mcs, _grid_key(snr), _grid_key(sir))
                jobs.append((spec, key, mcs, snr, float(sir), t, *extra))
                index.append((ci, pi))
    recs = _map(trial_fn, jobs, spec.workers)
    reports = []
    if kind == "covert_ber_cancel":
        # one row per packet, in job order
        for job, r in zip(jobs, recs):
            reports.append({"snr_db": "inf" if job[3] is None else job[3], "sir_db": job[4],
                            "trial": r.trial, "covert_bits": r.trials, "errors": r.errors,
                            "detected": r.detected, "degraded": r.extra.get("degraded", False),
                            "suppression_db": r.suppression_db, "ofdm_bit_errors": r.ofdm_bit_errors})
    curves = []
    for ci, (label, snr) in enumerate(snrs):
        pts = []
        for pi, sir in enumerate(spec.sir_db):
            rs = [r for r, ix in zip(recs, index) if ix == (ci, pi) and r.trials > 0]
            if not any(r.detected for r in rs):
                log.warning("%s: no usable packets at SIR %g dB", label, sir)
                continue
            pts.append(CurvePoint.from_records(
                spec.name, float(sir), rs, mcs=mcs,
                snr_db=float("inf") if snr is None else snr, sir_db=float(sir)))
        curves.append(Curve(label, pts))
    return ExperimentResult(spec, curves, reports)


def run_per_vs_sir(spec: ExperimentSpec) -> ExperimentResult:
    return _sir_sweep(spec, "per_vs_sir", _per_trial)


def run_covert_ber(spec: ExperimentSpec, with_cancellation: bool) -> ExperimentResult:
    kind = "covert_ber_cancel" if with_cancellation else "covert_ber_nocancel"
    return _sir_sweep(spec, kind, _covert_trial, extra=(with_cancellation,))


# -- OTA replay ------------------------------------------------------------

def _load_recording(spec: ExperimentSpec, i: int):
    """(recording, truth psdu bits or None) for corpus entry ``i``."""
    paths = spec.ota.get("recordings") or []
    if paths:
        return read_iq(paths[i]), None
    params = {k: spec.ota[k] for k in OTA_DEFAULTS if k in spec.ota and k != "n_recordings"}
    rec, truth = ota_recording_for(spec.seed, i, spec.mcs[0], spec.psdu_octets, params)
    return rec, truth.psdu_bits


def _ota_trial(job):
    spec, i, given = job
    rec, truth = (given, None) if given is not None else _load_recording(spec, i)
    name = rec.path.name if rec.path else f"ota_{i:04d}"
    if len(rec) == 0:
        log.info("%s: empty recording skipped", name)
        return name, None
    mcs = int(rec.metadata.get("mcs", spec.mcs[0]))
    octets = int(rec.metadata.get("psdu_octets", spec.psdu_octets))
    x = rec.samples
    if x.sample_rate_hz != 20e6:
        x = resample(x, 20e6)
    x = x.samples
    # placement only: find the packet in the clean recording so the covert
    # frame can be laid under its body; the receiver starts from scratch below
    est = detect_and_sync(x)
    if est is None:
        log.info("%s: no packet detected, skipped", name)
        return name, None
    ccfg = CovertConfig(start_offset=spec.covert_start_offset)
    start = est.fine_timing + spec.covert_start_offset
    n_samp = PREAMBLE_LEN + 80 * (1 + n_data_symbols(octets, mcs))
    n_bits = capacity_samples(min(n_samp, x.size - est.fine_timing), ccfg)
    out = []
    kk = _KIND_KEY["ota_replay"]
    for pi, sir in enumerate(spec.sir_db):
        rng = rng_for(spec.seed, kk, _grid_key(sir), i)
        cbits = rng.integers(0, 2, n_bits).astype(np.uint8)
        y = inject(x, covert_modulate(cbits, ccfg), float(sir), start)
        raw, _ = covert_demodulate(y, ccfg, n_bits, start)
        rc = recover_covert(y, mcs, octets, n_bits, _ofdm_cfg(spec), ccfg, covert_start=start,
                            truth_psdu=truth, mode=spec.cancel_mode, method=spec.cancel_method)
        out.append({
            "recording": name,
            "sir_db": float(sir),
            "covert_bits": n_bits,
            "errors_nocancel": int(np.count_nonzero(raw != cbits)),
            "errors_cancel": int(np.count_nonzero(rc.bits != cbits)),
            "detected": bool(rc.report.detected),
            "suppression_db": float(rc.report.suppression_db),
            "ofdm_bit_errors": rc.report.ofdm_bit_errors,
        })
    return name, out


def run_ota_replay(spec: ExperimentSpec, recordings: list[IqRecording] | None = None) -> ExperimentResult:
    """Inject, recover and score every recording at every SIR.

    ``recordings`` (in memory) take precedence over ``spec.ota['recordings']``
    (file paths); with neither, a synthetic OTA-like corpus is generated.
    """
    if recordings is not None:
        jobs = [(spec, i, rec) for i, rec in enumerate(recordings)]
    else:
        n = len(spec.ota.get("recordings") or []) or int(spec.ota.get("n_recordings",
                                                                      OTA_DEFAULTS["n_recordings"]))
        jobs = [(spec, i, None) for i in range(n)]
    n = len(jobs)
    results = _map(_ota_trial, jobs, spec.workers)
    reports = [row for _, rows in results if rows for row in rows]
    skipped = [name for name, rows in results if rows is None]
    curves = []
    for label, err_key in (("with cancellation", "errors_cancel"), ("without cancellation", "errors_nocancel")):
        pts = []
        for sir in spec.sir_db:
            rows = [r for r in reports if r["sir_db"] == float(sir) and r["detected"]]
            recs = [TrialRecord(0, r[err_key], r["covert_bits"], suppression_db=r["suppression_db"]
                                if err_key == "errors_cancel" else float("nan")) for r in rows]
            if not recs or sum(r.trials for r in recs) == 0:
                continue
            suffix = "cancel" if err_key == "errors_cancel" else "nocancel"
            pts.append(CurvePoint.from_records(f"{spec.name}_{suffix}", float(sir), recs,
                                               mcs=spec.mcs[0], sir_db=float(sir)))
        curves.append(Curve(label, pts))
    supp = [r["suppression_db"] for r in reports if math.isfinite(r["suppression_db"])]
    summary = {"recordings": n, "skipped": len(skipped), "skipped_names": skipped,
               "mean_suppression_db": float(np.mean(supp)) if supp else float("nan")}
    return ExperimentResult(spec, curves, reports, summary)


# -- spectral mask ---------------------------------------------------------

def _mask_trial(job):
    """Clean packet and, per SIR, an antithetic pair (+frame, -frame).

    Averaging PSDs over the pair cancels the OFDM x covert cross terms
    exactly, so ensemble PSDs equal clean PSD + covert PSD without the
    sampling noise those cross terms add.
    """
    spec, t = job
    rng = rng_for(spec.seed, _KIND_KEY["mask_check"], t)
    pkt = modulate(random_psdu(rng, spec.psdu_octets), spec.mcs[0]).samples
    ccfg = CovertConfig(start_offset=spec.covert_start_offset)
    n_bits = capacity_samples(len(pkt), ccfg)
    frame = covert_modulate(rng.integers(0, 2, max(n_bits, 1)), ccfg)
    neg = type(frame)(frame.bits, frame.waveform.with_samples(-frame.waveform.samples))
    out = {"clean": [pkt]}
    for sir in spec.sir_db:
        out[float(sir)] = [inject(pkt, f, float(sir), spec.covert_start_offset) for f in (frame, neg)]
    return out


def run_mask_check(spec: ExperimentSpec) -> ExperimentResult:
    m = spec.mask
    bps = m.get("breakpoints", DEFAULT_MASK)
    kw = {"breakpoints": bps, "nfft": m.get("nfft"), "oversample": m.get("oversample", 4)}
    batches = _map(_mask_trial, [(spec, t) for t in range(spec.packets_per_point)], spec.workers)
    clean = [b for batch in batches for b in batch["clean"]]
    ref = check_spectral_mask(clean, **kw)
    keys = ["clean"] + [float(s) for s in spec.sir_db]
    own_ref = [check_spectral_mask(batch["clean"][0], **kw) for batch in batches]
    reports, pts = [], []
    for key in keys:
        bufs = [b for batch in batches for b in batch[key]]
        ens = ref if key == "clean" else check_spectral_mask(bufs, reference_db=ref.peak_psd_db, **kw)
        # per packet: anchored to that packet's clean peak
        if key == "clean":
            fails = sum(not r.passed for r in own_ref)
        else:
            fails = sum(not check_spectral_mask(batch[key][0], reference_db=r.peak_psd_db, **kw).passed
                        for batch, r in zip(batches, own_ref))
        sir = float("inf") if key == "clean" else key
        pts.append(CurvePoint(spec.name, sir, len(batches), fails, mcs=spec.mcs[0], sir_db=sir))
        reports.append({"sir_db": sir, "passed": ens.passed,
                        "margins_db": [[bp, round(v, 6)] for bp, v in ens.margins_db],
                        "min_margin_db": round(ens.min_margin_db, 6),
                        "dc_delta_db": round(ens.dc_delta_db, 6), "dc_raised": ens.dc_raised})
    return ExperimentResult(spec, [Curve("mask failures", pts)], reports,
                            {"breakpoints": bps})


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    if spec.kind == "baseline_per":
        return run_baseline_per(spec)
    if spec.kind == "per_vs_sir":
        return run_per_vs_sir(spec)
    if spec.kind == "covert_ber_nocancel":
        return run_covert_ber(spec, with_cancellation=False)
    if spec.kind == "covert_ber_cancel":
        return run_covert_ber(spec, with_cancellation=True)
    if spec.kind == "ota_replay":
        return run_ota_replay(spec)
    if spec.kind == "mask_check":
        return run_mask_check(spec)
    raise ValueError(f"unknown experiment kind {spec.kind!r}")
