"""Raw IQ recordings: interleaved float32 little-endian I/Q plus a JSON sidecar.

``capture.iq`` is described by ``capture.json`` next to it, holding
``sample_rate_hz``, ``center_freq_hz`` and ``description``. Extra sidecar keys
are kept in ``IqRecording.metadata``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..sigcore import ComplexBuffer, as_samples

_REQUIRED = ("sample_rate_hz", "center_freq_hz", "description")


@dataclass
class IqRecording:
    samples: ComplexBuffer
    center_freq_hz: float = 0.0
    description: str = ""
    metadata: dict = field(default_factory=dict)
    path: Path | None = None

    @property
    def sample_rate_hz(self) -> float:
        return self.samples.sample_rate_hz

    def __len__(self):
        return len(self.samples)


def sidecar_path(path) -> Path:
    path = Path(path)
    if path.suffix == ".json":
        raise ValueError("IQ data file must not use the .json suffix")
    return path.with_suffix(".json")


def write_iq(path, x, sample_rate_hz: float | None = None, center_freq_hz: float = 0.0,
             description: str = "", **metadata) -> Path:
    """Write samples and sidecar; returns the data path."""
    path = Path(path)
    rate = sample_rate_hz or (x.sample_rate_hz if isinstance(x, ComplexBuffer) else None)
    if not rate or rate <= 0:
        raise ValueError("a positive sample rate is required")
    s = as_samples(x)
    inter = np.empty(2 * s.size, dtype="<f4")
    inter[0::2] = s.real
    inter[1::2] = s.imag
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(inter.tobytes())
    meta = {"sample_rate_hz": float(rate), "center_freq_hz": float(center_freq_hz),
            "description": str(description)}
    meta.update(metadata)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_iq(path) -> IqRecording:
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise FileNotFoundError(f"missing sidecar {side}")
    meta = json.loads(side.read_text())
    missing = [k for k in _REQUIRED if k not in meta]
    if missing:
        raise ValueError(f"{side}: missing field(s) {', '.join(missing)}")
    rate = meta["sample_rate_hz"]
    if not isinstance(rate, (int, float)) or rate <= 0:
        raise ValueError(f"{side}: sample_rate_hz must be a positive number")
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    if raw.size % 2:
        raise ValueError(f"{path}: odd number of float32 values, not I/Q pairs")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    extra = {k: v for k, v in meta.items() if k not in _REQUIRED}
    return IqRecording(ComplexBuffer(samples, float(rate)), float(meta["center_freq_hz"]),
                       str(meta["description"]), extra, path)
