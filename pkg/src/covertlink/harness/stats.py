"""Trial records, curve points and binomial confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

Z95 = 1.959963984540054


def wilson_ci(errors: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("need at least one trial")
    if not 0 <= errors <= trials:
        raise ValueError("errors must be in [0, trials]")
    p = errors / trials
    z2 = z * z
    den = 1 + z2 / trials
    centre = (p + z2 / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / den
    # clamp so the interval always contains p despite rounding at the edges
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


def intervals_overlap(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


@dataclass
class TrialRecord:
    """Outcome of one packet.

    ``errors`` counts packet errors (0/1) for PER experiments and covert bit
    errors for BER experiments; ``trials`` is the matching denominator.
    """

    trial: int
    errors: int
    trials: int
    detected: bool = True
    suppression_db: float = float("nan")
    ofdm_bit_errors: int | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class CurvePoint:
    experiment: str
    x_db: float
    trials: int
    errors: int
    mcs: int | None = None
    snr_db: float | None = None
    sir_db: float | None = None
    mean_suppression_db: float | None = None
    skipped: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("a curve point needs at least one trial")
        if not 0 <= self.errors <= self.trials:
            raise ValueError("errors must be in [0, trials]")

    @property
    def rate(self) -> float:
        return self.errors / self.trials

    @property
    def wilson_ci95(self) -> tuple[float, float]:
        return wilson_ci(self.errors, self.trials)

    @classmethod
    def from_records(cls, experiment: str, x_db: float, records, **kw) -> "CurvePoint":
        used = [r for r in records if r.detected]
        errors = sum(r.errors for r in used)
        trials = sum(r.trials for r in used)
        supp = [r.suppression_db for r in used if math.isfinite(r.suppression_db)]
        mean_supp = sum(supp) / len(supp) if supp else None
        return cls(experiment, x_db, trials, errors, mean_suppression_db=mean_supp,
                   skipped=len(records) - len(used), **kw)


@dataclass
class Curve:
    label: str
    points: list[CurvePoint]

    @property
    def x(self):
        return [p.x_db for p in self.points]

    @property
    def rates(self):
        return [p.rate for p in self.points]
