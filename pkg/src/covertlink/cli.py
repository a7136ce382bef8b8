"""covertlink command line.

    covertlink run --config exp.json [--set packets_per_point=50] [--out DIR]
    covertlink synth-ota --out corpus/ --count 20
    covertlink inject --in pkt.iq --covert-hex c0ffee --sir 35 --out inj.iq
    covertlink recover --in inj.iq [--truth-hex c0ffee]
    covertlink maskcheck --in inj.iq [--reference pkt.iq]

Exit status: 0 success, 1 other failure, 2 configuration error, 3 injection
error, 4 no packet detected.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .canceller import recover_covert
from .covert import CovertConfig, capacity_samples, covert_modulate, inject
from .harness.iqfile import read_iq, write_iq
from .harness.mask import check_spectral_mask
from .harness.ota import OTA_DEFAULTS, write_ota_corpus
from .harness.output import write_outputs
from .harness.runners import run_experiment
from .harness.spec import ConfigError, load_spec, parse_override
from .ofdm import detect_and_sync, n_data_symbols
from .ofdm.params import PREAMBLE_LEN
from .sigcore import build_spreading_code, resample

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_INJECT, EXIT_DETECT = 0, 1, 2, 3, 4
RATE_HZ = 20e6

log = logging.getLogger("covertlink")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_OTHER):
        super().__init__(message)
        self.code = code


# -- helpers ----------------------------------------------------------------

def hex_to_bits(text: str) -> np.ndarray:
    """Hex string to bits, most significant bit of each octet first."""
    t = text.strip().lower().removeprefix("0x").replace(" ", "")
    if not t or len(t) % 2:
        raise CliError(f"covert payload {text!r} is not a whole number of hex octets", EXIT_CONFIG)
    try:
        raw = bytes.fromhex(t)
    except ValueError:
        raise CliError(f"covert payload {text!r} is not hex", EXIT_CONFIG) from None
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))


def bits_to_hex(bits) -> str:
    bits = np.asarray(bits, dtype=np.uint8)
    pad = (-bits.size) % 8
    return np.packbits(np.r_[bits, np.zeros(pad, dtype=np.uint8)]).tobytes().hex()


def _payload_bits(hex_text: str | None, path: str | None) -> np.ndarray | None:
    if hex_text and path:
        raise CliError("give either a hex payload or a payload file, not both", EXIT_CONFIG)
    if path:
        try:
            return hex_to_bits(Path(path).read_text())
        except OSError as exc:
            raise CliError(f"cannot read {path}: {exc}", EXIT_CONFIG) from None
    if hex_text:
        return hex_to_bits(hex_text)
    return None


def _code_init(text: str) -> tuple[int, ...]:
    if len(text) != 6 or set(text) - {"0", "1"}:
        raise CliError("--code-init must be six binary digits, e.g. 000001", EXIT_CONFIG)
    state = tuple(int(c) for c in text)
    if not any(state):
        raise CliError("--code-init must not be all zeros", EXIT_CONFIG)
    return state


def _covert_cfg(args) -> CovertConfig:
    code = build_spreading_code(init_state=_code_init(args.code_init))
    return CovertConfig(code=code, start_offset=args.start_offset)


def _read_20msps(path):
    try:
        rec = read_iq(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read IQ file {path}: {exc}", EXIT_CONFIG) from None
    x = rec.samples
    if x.sample_rate_hz != RATE_HZ:
        try:
            x = resample(x, RATE_HZ)
        except ValueError as exc:
            raise CliError(f"{path}: {exc}", EXIT_CONFIG) from None
    return rec, x


def _packet_len(mcs: int, octets: int) -> int:
    return PREAMBLE_LEN + 80 * (1 + n_data_symbols(octets, mcs))


# -- subcommands --------------------------------------------------------------

def cmd_run(args) -> int:
    overrides = {}
    for item in args.set or []:
        key, value = parse_override(item)
        overrides[key] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    spec = load_spec(args.config, overrides)
    log.info("running %s (%s), seed %d", spec.name, spec.kind, spec.seed)
    result = run_experiment(spec)
    paths = write_outputs(result, args.out)
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    if result.summary.get("mean_suppression_db") is not None:
        print(f"mean suppression: {result.summary['mean_suppression_db']:.2f} dB")
    return EXIT_OK


def cmd_synth_ota(args) -> int:
    params = dict(OTA_DEFAULTS)
    params.update({
        "sample_rate_hz": args.sample_rate,
        "snr_db_min": args.snr_min,
        "snr_db_max": args.snr_max,
        "cfo_hz_max": args.cfo_max,
        "n_taps_min": args.taps_min,
        "n_taps_max": args.taps_max,
    })
    if args.clean:
        params.update(snr_db_min=math.inf, snr_db_max=math.inf, cfo_hz_max=0.0,
                      n_taps_min=1, n_taps_max=1)
    if params["n_taps_max"] < params["n_taps_min"] or params["snr_db_max"] < params["snr_db_min"]:
        raise CliError("maximum below minimum in OTA parameters", EXIT_CONFIG)
    out = Path(args.out or "ota_corpus")
    paths = write_ota_corpus(out, args.count, args.seed or 0, args.mcs, args.psdu_octets, params)
    print(f"wrote {len(paths)} recordings to {out}")
    return EXIT_OK


def cmd_inject(args) -> int:
    bits = _payload_bits(args.covert_hex, args.covert_file)
    if bits is None:
        raise CliError("no covert payload given (--covert-hex or --covert-file)", EXIT_CONFIG)
    rec, x = _read_20msps(args.input)
    out = Path(args.out or Path(args.input).with_name(Path(args.input).stem + "_inj.iq"))
    meta = dict(rec.metadata)
    mcs = int(meta.get("mcs", args.mcs))
    octets = int(meta.get("psdu_octets", args.psdu_octets))
    cfg = _covert_cfg(args)
    if args.sir == math.inf:
        # nothing is added; keep the original samples bit for bit
        write_iq(out, rec.samples, center_freq_hz=rec.center_freq_hz, description=rec.description,
                 **{**meta, "injected": False, "sir_db": "inf"})
        print(f"wrote {out} (no injection at SIR inf)")
        return EXIT_OK
    est = detect_and_sync(x.samples)
    if est is None:
        raise CliError("no OFDM packet found to carry the covert frame", EXIT_DETECT)
    avail = min(_packet_len(mcs, octets), len(x) - est.fine_timing)
    cap = capacity_samples(avail, cfg)
    if bits.size > cap:
        raise CliError(f"covert payload of {bits.size} bits exceeds packet capacity of {cap} bits",
                       EXIT_INJECT)
    start = est.fine_timing + cfg.start_offset
    try:
        y = inject(x, covert_modulate(bits, cfg), args.sir, start)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INJECT) from None
    meta.update({"injected": True, "sir_db": args.sir, "covert_start": int(start),
                 "covert_bits": int(bits.size), "covert_hex": bits_to_hex(bits),
                 "mcs": mcs, "psdu_octets": octets})
    write_iq(out, y, center_freq_hz=rec.center_freq_hz,
             description=(rec.description + "; covert frame injected").strip("; "), **meta)
    print(f"wrote {out}: {bits.size} covert bits at SIR {args.sir:g} dB, start sample {start}")
    return EXIT_OK


def cmd_recover(args) -> int:
    rec, x = _read_20msps(args.input)
    meta = rec.metadata
    mcs = int(meta.get("mcs", args.mcs))
    octets = int(meta.get("psdu_octets", args.psdu_octets))
    cfg = _covert_cfg(args)
    truth = _payload_bits(args.truth_hex, args.truth_file)
    if truth is None and args.use_sidecar_truth and "covert_hex" in meta:
        truth = hex_to_bits(meta["covert_hex"])[: int(meta.get("covert_bits", 0)) or None]
    samples = x.samples
    pos, found, total_err, total_bits = 0, 0, 0, 0
    recovered = []
    while True:
        est = detect_and_sync(samples, search_from=pos)
        if est is None:
            break
        found += 1
        plen = _packet_len(mcs, octets)
        avail = min(plen, samples.size - est.fine_timing)
        n_bits = args.n_bits or int(meta.get("covert_bits", 0)) or capacity_samples(avail, cfg)
        n_bits = min(n_bits, capacity_samples(avail, cfg))
        start = est.fine_timing + cfg.start_offset
        if found == 1 and "covert_start" in meta and abs(int(meta["covert_start"]) - start) <= 2:
            start = int(meta["covert_start"])
        # hand the canceller just this packet, with a little lead-in
        offset = max(est.fine_timing - 64, 0)
        view = samples[offset : est.fine_timing + plen + 80]
        result = recover_covert(view, mcs, octets, n_bits, covert_cfg=cfg,
                                covert_start=start - offset)
        line = f"packet {found} at sample {est.fine_timing}: suppression {result.report.suppression_db:.2f} dB"
        if result.report.degraded:
            line += " (degraded: despread without cancellation)"
        if truth is not None and found == 1:
            n = min(truth.size, result.bits.size)
            errs = int(np.count_nonzero(truth[:n] != result.bits[:n]))
            total_err += errs
            total_bits += n
            line += f", covert BER {errs}/{n} = {errs / max(n, 1):.4g}"
        print(line)
        recovered.append(result.bits)
        pos = est.fine_timing + plen
        if pos >= samples.size:
            break
    if not found:
        raise CliError("no OFDM packets detected", EXIT_DETECT)
    print("covert payload: " + " ".join(bits_to_hex(b) for b in recovered))
    if args.bits_out:
        Path(args.bits_out).write_text("\n".join(bits_to_hex(b) for b in recovered) + "\n")
    return EXIT_OK


def cmd_maskcheck(args) -> int:
    _, x = _read_20msps(args.input)
    ref_db = None
    if args.reference:
        _, r = _read_20msps(args.reference)
        ref_db = check_spectral_mask(r, oversample=args.oversample).peak_psd_db
    try:
        res = check_spectral_mask(x, oversample=args.oversample, reference_db=ref_db)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    for bp, margin in res.margins_db:
        print(f"  from {bp:5.1f} MHz: margin {margin:7.2f} dB")
    print(f"  DC bin vs occupied average: {res.dc_delta_db:.2f} dB" + ("  (raised)" if res.dc_raised else ""))
    print("PASS" if res.passed else "FAIL")
    return EXIT_OK if res.passed else EXIT_OTHER


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="experiment seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory or file")
    verb = common.add_mutually_exclusive_group()
    verb.add_argument("--quiet", "-q", action="store_true")
    verb.add_argument("--verbose", "-v", action="store_true")

    covert = argparse.ArgumentParser(add_help=False)
    covert.add_argument("--mcs", type=int, default=7, help="when the sidecar does not say")
    covert.add_argument("--psdu-octets", type=int, default=1000, help="when the sidecar does not say")
    covert.add_argument("--start-offset", type=int, default=320,
                        help="covert frame start, samples after the packet start")
    covert.add_argument("--code-init", default="000001", help="LFSR initial state of the code")

    p = argparse.ArgumentParser(prog="covertlink", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run an experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
    r.add_argument("--workers", type=int, help="worker processes (capped by COVERTLINK_THREADS)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("synth-ota", parents=[common], help="write a synthetic OTA-like corpus")
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--mcs", type=int, default=7)
    s.add_argument("--psdu-octets", type=int, default=1000)
    s.add_argument("--sample-rate", type=float, default=OTA_DEFAULTS["sample_rate_hz"])
    s.add_argument("--snr-min", type=float, default=OTA_DEFAULTS["snr_db_min"])
    s.add_argument("--snr-max", type=float, default=OTA_DEFAULTS["snr_db_max"])
    s.add_argument("--cfo-max", type=float, default=OTA_DEFAULTS["cfo_hz_max"])
    s.add_argument("--taps-min", type=int, default=OTA_DEFAULTS["n_taps_min"])
    s.add_argument("--taps-max", type=int, default=OTA_DEFAULTS["n_taps_max"])
    s.add_argument("--clean", action="store_true", help="no multipath, CFO or noise")
    s.set_defaults(func=cmd_synth_ota)

    i = sub.add_parser("inject", parents=[common, covert], help="hide a covert frame in a recording")
    i.add_argument("--in", dest="input", required=True)
    i.add_argument("--covert-hex")
    i.add_argument("--covert-file", help="file holding the payload as hex")
    i.add_argument("--sir", type=float, default=35.0, help="dB; 'inf' copies the samples")
    i.set_defaults(func=cmd_inject)

    c = sub.add_parser("recover", parents=[common, covert], help="cancel the OFDM packet and despread")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--truth-hex")
    c.add_argument("--truth-file")
    c.add_argument("--use-sidecar-truth", action="store_true",
                   help="score against the payload recorded by inject")
    c.add_argument("--n-bits", type=int, help="covert bits per packet")
    c.add_argument("--bits-out", help="write recovered payloads (hex, one line per packet)")
    c.set_defaults(func=cmd_recover)

    m = sub.add_parser("maskcheck", parents=[common], help="check a recording against the 802.11 mask")
    m.add_argument("--in", dest="input", required=True)
    m.add_argument("--reference", help="clean recording whose PSD peak sets 0 dBr")
    m.add_argument("--oversample", type=int, default=4)
    m.set_defaults(func=cmd_maskcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which is also our config-error code
        return int(exc.code or 0)
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001 - report, do not dump a traceback
        log.debug("unhandled error", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
