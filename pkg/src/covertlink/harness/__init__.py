"""Experiment orchestration: sweeps, Monte-Carlo trials, IQ files, mask checks, outputs."""

from .iqfile import IqRecording, read_iq, write_iq
from .mask import MaskResult, check_spectral_mask, mask_limit
from .ota import synth_ota_recording, write_ota_corpus
from .output import csv_text, write_outputs
from .runners import (
    ExperimentResult,
    run_baseline_per,
    run_covert_ber,
    run_experiment,
    run_mask_check,
    run_ota_replay,
    run_per_vs_sir,
)
from .spec import ConfigError, ExperimentSpec, load_spec
from .stats import Curve, CurvePoint, TrialRecord, wilson_ci

__all__ = [
    "ConfigError", "Curve", "CurvePoint", "ExperimentResult", "ExperimentSpec", "IqRecording",
    "MaskResult", "TrialRecord", "check_spectral_mask", "csv_text", "load_spec", "mask_limit",
    "read_iq", "run_baseline_per", "run_covert_ber", "run_experiment", "run_mask_check",
    "run_ota_replay", "run_per_vs_sir", "synth_ota_recording", "wilson_ci", "write_iq",
    "write_ota_corpus", "write_outputs",
]
