"""Statistics over captured sequences: error uniformity, BER traces, histograms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import EmptyInputError
from .transceiver import SequenceReport

MIN_ERRORS_PER_BIN = 5
HIST_LOW, HIST_HIGH = 1e-8, 1e-2
HIST_BINS_PER_DECADE = 2


@dataclass(frozen=True)
class UniformityResult:
    statistic: float
    p_value: float
    bins: int


def uniformity_test(report: SequenceReport, bins: int = 10) -> Optional[UniformityResult]:
    """Pearson chi-square of error positions against a uniform spread.

    Returns ``None`` (not applicable) when fewer than ``5 * bins`` errors are
    available.
    """
    if bins < 2:
        raise ValueError("need at least two bins")
    if report.error_count < MIN_ERRORS_PER_BIN * bins:
        return None
    counts, _ = np.histogram(report.error_positions, bins=bins, range=(0, report.bits_compared))
    chi2, p = stats.chisquare(counts)
    return UniformityResult(float(chi2), float(p), bins)


def histogram_edges() -> np.ndarray:
    decades = round(np.log10(HIST_HIGH / HIST_LOW))
    return np.logspace(np.log10(HIST_LOW), np.log10(HIST_HIGH), decades * HIST_BINS_PER_DECADE + 1)


@dataclass(frozen=True)
class HistogramBin:
    low: float
    high: float
    count: int


def ber_histogram(bers: Sequence[float]) -> list[HistogramBin]:
    """Zero-error bin followed by log-spaced bins over [1e-8, 1e-2].

    BERs below 1e-8 land in the first log bin and BERs above 1e-2 in the
    last, so the counts always add up to the number of sequences.
    """
    bers = np.asarray(bers, dtype=float)
    edges = histogram_edges()
    nonzero = bers[bers > 0]
    idx = np.clip(np.searchsorted(edges, nonzero, side="right") - 1, 0, len(edges) - 2)
    counts = np.bincount(idx, minlength=len(edges) - 1)
    out = [HistogramBin(0.0, 0.0, int(np.sum(bers == 0)))]
    out += [HistogramBin(float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
    return out


@dataclass
class ChannelStatistics:
    reports: list[SequenceReport]
    uniformity: list[Optional[UniformityResult]] = field(default_factory=list)

    @property
    def ber_trace(self) -> list[float]:
        return [r.ber for r in self.reports]

    @property
    def total_errors(self) -> int:
        return sum(r.error_count for r in self.reports)

    @property
    def total_bits(self) -> int:
        return sum(r.bits_compared for r in self.reports)

    @property
    def average_ber(self) -> float:
        return self.total_errors / self.total_bits

    @property
    def histogram(self) -> list[HistogramBin]:
        return ber_histogram(self.ber_trace)


@dataclass
class RunStatistics:
    """Per-channel statistics keyed by mode-group order."""

    channels: dict[int, ChannelStatistics]

    def average_ber(self) -> dict[int, float]:
        return {m: s.average_ber for m, s in self.channels.items()}


def ber_stats(reports: Mapping[int, Sequence[SequenceReport]], bins: int = 10) -> RunStatistics:
    """Order reports by sequence index and attach uniformity tests."""
    if not reports or any(len(r) == 0 for r in reports.values()):
        raise EmptyInputError("ber_stats needs at least one report per channel")
    channels = {}
    for m in sorted(reports):
        ordered = sorted(reports[m], key=lambda r: r.sequence_index)
        channels[m] = ChannelStatistics(ordered, [uniformity_test(r, bins) for r in ordered])
    return RunStatistics(channels)
