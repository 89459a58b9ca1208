"""Sampled signals and band-limited delay helpers."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled signal.

    ``samples`` is 1-D for a single signal or 2-D ``(channels, samples)`` for a
    bundle sharing one sample rate (e.g. one field per fiber mode).
    """

    samples: np.ndarray
    rate: float

    def __len__(self):
        return self.samples.shape[-1]

    @property
    def duration(self) -> float:
        return len(self) / self.rate


def delay_phase(n: int, delay_samples: float) -> np.ndarray:
    """Spectral phase ramp for a circular delay of ``delay_samples`` samples."""
    f = np.fft.fftfreq(n)
    return np.exp(-2j * np.pi * f * delay_samples)


def fractional_delay(x: np.ndarray, delay_samples: float) -> np.ndarray:
    """Circularly delay ``x`` along its last axis by a possibly fractional amount.

    The delay is applied as a linear phase in the frequency domain, so it is
    exact for periodic band-limited signals and energy preserving in general.
    """
    if delay_samples == 0:
        return np.array(x, dtype=complex)
    n = x.shape[-1]
    if float(delay_samples).is_integer():
        return np.roll(np.asarray(x, dtype=complex), int(delay_samples), axis=-1)
    return np.fft.ifft(np.fft.fft(x, axis=-1) * delay_phase(n, delay_samples), axis=-1)


def rate_ratio(target_rate: float, source_rate: float, max_denominator: int = 10_000) -> Fraction:
    """Rational ``up/down`` factor mapping ``source_rate`` onto ``target_rate``."""
    ratio = Fraction(target_rate / source_rate).limit_denominator(max_denominator)
    if abs(float(ratio) * source_rate - target_rate) > 1e-9 * target_rate:
        raise ValueError(
            f"rate ratio {target_rate}/{source_rate} is not a small rational number"
        )
    return ratio
