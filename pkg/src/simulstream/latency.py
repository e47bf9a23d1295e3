"""Latency metrics for streaming translation sessions.

Average lagging compares each output's delay d(y_i) against an ideal
policy that spreads the source duration T_X evenly over the |Y|
outputs:

    AL = (1/tau) * sum_{i<=tau} [ d(y_i) - (T_X / |Y|) * (i - 1) ]

tau cuts the sum at the first output that had the whole source
available, because later outputs lag only by construction of the
metric, not by policy choice. Two variants share the formula: ideal
delays count only input waiting; computation-aware delays add compute
time charged by the session.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

IDEAL = "ideal"
COMPUTATION_AWARE = "computation_aware"

REPORT_CSV_COLUMNS = ("id", "al_ms", "ca_al_ms", "mean_delay_ms", "discont_ms", "n_tokens", "quality")


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class DelayProfile:
    delays_ms: tuple[float, ...]
    source_duration_ms: float
    variant: str = IDEAL
    # 1-based index of the first output emitted with the full source
    # consumed, when the producing session recorded it
    full_source_index: Optional[int] = None

    def __post_init__(self):
        if not self.delays_ms:
            raise MetricError("empty delay profile")
        if self.source_duration_ms <= 0:
            raise MetricError("source duration must be positive")
        if self.variant not in (IDEAL, COMPUTATION_AWARE):
            raise MetricError(f"unknown variant {self.variant!r}")
        prev = -math.inf
        for d in self.delays_ms:
            if d < prev - 1e-9:
                raise MetricError("delays must be non-decreasing")
            prev = d
        if self.full_source_index is not None and not 1 <= self.full_source_index <= len(
            self.delays_ms
        ):
            raise MetricError("full_source_index out of range")


def _first_full_source(profile: DelayProfile) -> int:
    if profile.full_source_index is not None:
        return profile.full_source_index
    for i, d in enumerate(profile.delays_ms, start=1):
        if d >= profile.source_duration_ms - 1e-9:
            return i
    return len(profile.delays_ms)


def average_lagging(profile: DelayProfile, tgt_len: Optional[int] = None) -> float:
    """AL in ms; tgt_len defaults to the profile length."""
    n = tgt_len if tgt_len is not None else len(profile.delays_ms)
    if n < 1:
        raise MetricError("target length must be >= 1")
    tau = min(_first_full_source(profile), len(profile.delays_ms))
    step = profile.source_duration_ms / n
    total = 0.0
    for i in range(1, tau + 1):
        total += profile.delays_ms[i - 1] - step * (i - 1)
    return total / tau


def latency_loss(profile: DelayProfile, tgt_len: Optional[int] = None) -> float:
    """Differentiable stand-in for AL: same sum with the cutoff pinned
    to the full output, so no data-dependent branch remains."""
    n = tgt_len if tgt_len is not None else len(profile.delays_ms)
    step = profile.source_duration_ms / n
    total = 0.0
    for i, d in enumerate(profile.delays_ms, start=1):
        total += d - step * (i - 1)
    return total / len(profile.delays_ms)


def expected_delays(alpha: np.ndarray, per_source_ms: float) -> DelayProfile:
    """Mean consumed source position per output, scaled to time."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim != 2 or alpha.size == 0:
        raise MetricError("alignment must be a non-empty matrix")
    if per_source_ms <= 0:
        raise MetricError("per_source_ms must be positive")
    positions = np.arange(1, alpha.shape[1] + 1)
    delays = alpha @ positions * per_source_ms
    return DelayProfile(
        delays_ms=tuple(float(d) for d in delays),
        source_duration_ms=alpha.shape[1] * per_source_ms,
        variant=IDEAL,
    )


@dataclass(frozen=True)
class LatencyReport:
    al_ms: float
    ca_al_ms: float
    mean_delay_ms: float
    discontinuity_total_ms: float
    num_output_tokens: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "al_ms": self.al_ms,
                "ca_al_ms": self.ca_al_ms,
                "mean_delay_ms": self.mean_delay_ms,
                "discontinuity_total_ms": self.discontinuity_total_ms,
                "num_output_tokens": self.num_output_tokens,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "LatencyReport":
        d = json.loads(text)
        return cls(
            al_ms=float(d["al_ms"]),
            ca_al_ms=float(d["ca_al_ms"]),
            mean_delay_ms=float(d["mean_delay_ms"]),
            discontinuity_total_ms=float(d["discontinuity_total_ms"]),
            num_output_tokens=int(d["num_output_tokens"]),
        )


def build_report(
    ideal: DelayProfile, ca: DelayProfile, discontinuity_total_ms: float, tgt_len: int
) -> LatencyReport:
    if len(ideal.delays_ms) != len(ca.delays_ms):
        raise MetricError("profile lengths differ")
    mean_delay = sum(ideal.delays_ms) / len(ideal.delays_ms)
    return LatencyReport(
        al_ms=average_lagging(ideal, tgt_len),
        ca_al_ms=average_lagging(ca, tgt_len),
        mean_delay_ms=mean_delay,
        discontinuity_total_ms=discontinuity_total_ms,
        num_output_tokens=len(ideal.delays_ms),
    )


def report_csv_header() -> str:
    return ",".join(REPORT_CSV_COLUMNS)


def report_csv_row(utt_id: str, report: LatencyReport, quality: float) -> str:
    return ",".join(
        [
            utt_id,
            f"{report.al_ms:.3f}",
            f"{report.ca_al_ms:.3f}",
            f"{report.mean_delay_ms:.3f}",
            f"{report.discontinuity_total_ms:.3f}",
            str(report.num_output_tokens),
            f"{quality:.3f}",
        ]
    )
