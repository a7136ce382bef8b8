"""CSV, SVG and JSON outputs for a finished experiment."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .runners import ExperimentResult  # noqa: E402

CSV_FIELDS = ["experiment", "mcs", "snr_db", "sir_db", "trials", "errors", "rate",
              "ci_lo", "ci_hi", "mean_suppression_db", "seed"]

_X_LABEL = {
    "baseline_per": "SNR (dB)",
    "per_vs_sir": "SIR (dB)",
    "covert_ber_nocancel": "SIR (dB)",
    "covert_ber_cancel": "SIR (dB)",
    "ota_replay": "SIR (dB)",
    "mask_check": "SIR (dB)",
}
_Y_LABEL = {
    "baseline_per": "PER",
    "per_vs_sir": "PER",
    "covert_ber_nocancel": "covert BER",
    "covert_ber_cancel": "covert BER",
    "ota_replay": "covert BER",
    "mask_check": "fraction of packets failing the mask",
}


def _db(v) -> str:
    if v is None:
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return ""
    return f"{v:.3f}"


def _rate(v: float) -> str:
    return f"{v:.6e}"


def csv_text(result: ExperimentResult) -> str:
    if not result.curves or not any(c.points for c in result.curves):
        raise ValueError("no curve points to write")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for curve in result.curves:
        for p in curve.points:
            lo, hi = p.wilson_ci95
            w.writerow([p.experiment, "" if p.mcs is None else p.mcs, _db(p.snr_db), _db(p.sir_db),
                        p.trials, p.errors, _rate(p.rate), _rate(lo), _rate(hi),
                        _db(p.mean_suppression_db), result.spec.seed])
    return buf.getvalue()


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_curves(result: ExperimentResult, path):
    spec = result.spec
    plt.rcParams["svg.hashsalt"] = "covertlink"
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for curve in result.curves:
        pts = [p for p in curve.points if math.isfinite(p.x_db)]
        if not pts:
            continue
        x = [p.x_db for p in pts]
        y = [p.rate for p in pts]
        lo = [p.rate - p.wilson_ci95[0] for p in pts]
        hi = [p.wilson_ci95[1] - p.rate for p in pts]
        ax.errorbar(x, y, yerr=[lo, hi], marker="o", ms=3, capsize=2, label=curve.label)
    ax.set_yscale("log", nonpositive="mask")
    ax.set_xlabel(_X_LABEL[spec.kind])
    ax.set_ylabel(_Y_LABEL[spec.kind])
    ax.set_title(spec.name)
    ax.grid(True, which="both", alpha=0.3)
    if len(result.curves) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_outputs(result: ExperimentResult, out_dir=None) -> dict[str, Path]:
    """Write ``<name>.csv`` and ``<name>.svg`` (plus per-packet reports when present)."""
    spec = result.spec
    out = Path(out_dir or spec.output.get("dir") or ".")
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / spec.output.get("csv", f"{spec.name}.csv")
    svg_path = out / spec.output.get("svg", f"{spec.name}.svg")
    text = csv_text(result)
    csv_path.write_text(text)
    paths = {"csv": csv_path}
    plot_curves(result, svg_path)
    paths["svg"] = svg_path
    if result.reports:
        rep_path = out / f"{spec.name}_reports.json"
        rep_path.write_text(json.dumps(result.reports, indent=1, sort_keys=True, default=_jsonable) + "\n")
        paths["reports"] = rep_path
    if result.summary:
        sum_path = out / f"{spec.name}_summary.json"
        sum_path.write_text(json.dumps(result.summary, indent=1, sort_keys=True, default=_jsonable) + "\n")
        paths["summary"] = sum_path
    return paths


def _jsonable(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return str(v)
