"""Transmitter and receiver ends of the link.

Transmit side: PRBS pattern, OOK field modulation, port de-correlation
delays. Receive side: square-law photodetection with additive receiver noise,
scope capture at a rational sample rate, offline re-sampling and PRBS
synchronisation, and hard decisions with error counting.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.signal import resample_poly

from .errors import SyncError
from .waveform import Waveform, rate_ratio

# Fibonacci LFSR taps (x^k + x^tap + 1) for maximal-length sequences.
PRBS_TAPS = {7: 6, 9: 5, 11: 9, 15: 14, 20: 3, 23: 18, 31: 28}

SYNC_OVERSAMPLING = 8
# Correlation peak must exceed this many standard deviations of the
# no-signal normalised correlation (1/sqrt(period)).
SYNC_SIGMA = 8.0
EDGE_GUARD_BITS = 32


def noise_sigma_for_q(q: float, extinction_db: float = 13.0) -> float:
    """Receiver noise std giving Q-factor ``q`` for a unit mark level."""
    return (1 - 10 ** (-extinction_db / 10)) / (2 * q)


DEFAULT_TARGET_Q = 7.0
DEFAULT_NOISE_SIGMA = noise_sigma_for_q(DEFAULT_TARGET_Q)


@dataclass(frozen=True)
class TxSpec:
    bit_rate: float = 28e9
    samples_per_bit: int = 4
    prbs_order: int = 15
    port_delay_bits: tuple[int, ...] = (0, 8192, 16384, 24576)
    rise_time_bits: float = 0.3
    extinction_db: float = 13.0
    prbs_seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "port_delay_bits", tuple(int(d) for d in self.port_delay_bits))
        if self.samples_per_bit < 4:
            raise ValueError("samples_per_bit must be >= 4")
        if len(set(self.port_delay_bits)) != len(self.port_delay_bits):
            raise ValueError("port delays must be pairwise distinct")
        if not 0 <= self.rise_time_bits <= 1:
            raise ValueError("rise_time_bits must lie in [0, 1]")
        if self.prbs_order not in PRBS_TAPS:
            raise ValueError(f"unsupported PRBS order {self.prbs_order}")
        if not self.bit_rate > 0:
            raise ValueError("bit_rate must be > 0")
        if not self.extinction_db > 0:
            raise ValueError("extinction_db must be > 0")

    @property
    def sample_rate(self) -> float:
        return self.bit_rate * self.samples_per_bit

    @property
    def period(self) -> int:
        return 2 ** self.prbs_order - 1

    @property
    def mark_power(self) -> float:
        return 1.0

    @property
    def space_power(self) -> float:
        return 10 ** (-self.extinction_db / 10)


@dataclass(frozen=True)
class CaptureSpec:
    """Scope settings.

    ``electrical_noise_sigma`` is the receiver noise std within the scope
    bandwidth, relative to a unit mark level. ``scope_rate = None`` lets each
    experiment pick its own rate (80 GSa/s single channel, 40 GSa/s four).
    """

    scope_rate: Optional[float] = None
    total_samples: int = 1_048_576
    electrical_noise_sigma: float = DEFAULT_NOISE_SIGMA

    def __post_init__(self):
        if self.scope_rate is not None and not self.scope_rate > 0:
            raise ValueError("scope_rate must be > 0")
        if self.total_samples <= 0:
            raise ValueError("total_samples must be > 0")
        if not self.electrical_noise_sigma >= 0:
            raise ValueError("electrical_noise_sigma must be >= 0")


@dataclass
class SequenceReport:
    sequence_index: int
    bits_compared: int
    error_count: int
    error_positions: np.ndarray = field(repr=False)
    q_factor: float = math.nan

    @property
    def ber(self) -> float:
        return self.error_count / self.bits_compared if self.bits_compared else 0.0


@dataclass(frozen=True, eq=False)
class SyncResult:
    soft: np.ndarray
    offset: int
    polarity: int
    sampling_phase: int
    peak: float
    start_bit: int


# -- transmitter -----------------------------------------------------------

def prbs(order: int, seed: int = 1) -> np.ndarray:
    """One period of a maximal-length PRBS from a Fibonacci LFSR."""
    tap = PRBS_TAPS[order]
    mask = (1 << order) - 1
    state = seed & mask
    if state == 0:
        raise ValueError("PRBS seed must be a nonzero state")
    n = mask
    out = np.empty(n, dtype=np.uint8)
    for i in range(n):
        bit = ((state >> (order - 1)) ^ (state >> (tap - 1))) & 1
        state = ((state << 1) | bit) & mask
        out[i] = bit
    return out


def prbs15(seed: int = 1) -> np.ndarray:
    return prbs(15, seed)


def _edge_fraction(u: np.ndarray, rise: float) -> np.ndarray:
    return 0.5 * (1 - np.cos(np.pi * np.clip(u / rise, 0.0, 1.0)))


def ook_modulate(bits: Sequence[int], tx: TxSpec) -> Waveform:
    """NRZ OOK field envelope with raised-cosine intensity edges.

    The bit pattern is treated as periodic, so the last bit's edge into the
    first bit wraps around. Transitions are centred on bit boundaries and
    shaped in optical power, so the mean power is ``(P1 + P0) / 2`` for a
    balanced pattern.
    """
    bits = np.asarray(bits, dtype=float)
    if bits.size == 0:
        raise ValueError("no bits to modulate")
    spb = tx.samples_per_bit
    t = np.arange(bits.size * spb) / spb
    idx = np.floor(t).astype(int)
    u = t - idx
    cur = bits[idx]
    level = cur.copy()
    rise = tx.rise_time_bits
    if rise > 0:
        prev = np.roll(bits, 1)[idx]
        nxt = np.roll(bits, -1)[idx]
        lead = u < rise / 2
        level[lead] = prev[lead] + (cur[lead] - prev[lead]) * _edge_fraction(u[lead] + rise / 2, rise)
        trail = u > 1 - rise / 2
        level[trail] = cur[trail] + (nxt[trail] - cur[trail]) * _edge_fraction(
            u[trail] - (1 - rise / 2), rise
        )
    power = tx.space_power + (tx.mark_power - tx.space_power) * level
    return Waveform(np.sqrt(power).astype(complex), tx.sample_rate)


def decorrelate_ports(waveform: Waveform, tx: TxSpec) -> list[Waveform]:
    """Circularly delayed copies of ``waveform``, one per mux port."""
    spb = tx.samples_per_bit
    return [
        Waveform(np.roll(waveform.samples, d * spb), waveform.rate) for d in tx.port_delay_bits
    ]


# -- receiver --------------------------------------------------------------

def photodetect(field: Waveform, cap: CaptureSpec, seed=None) -> Waveform:
    """Square-law detection plus additive Gaussian receiver noise."""
    e = np.asarray(field.samples)
    current = e.real * e.real + e.imag * e.imag
    if cap.electrical_noise_sigma > 0:
        rng = np.random.default_rng(seed)
        current = current + rng.normal(0.0, cap.electrical_noise_sigma, size=current.shape)
    return Waveform(current, field.rate)


def _pad_cycles(up: int, down: int) -> int:
    half = 10 * max(up, down)  # resample_poly default filter half-length
    return math.ceil(half / up) // down + 2


def scope_sample(waveform: Waveform, cap: CaptureSpec, start: int = 0) -> Waveform:
    """Capture ``cap.total_samples`` samples at ``cap.scope_rate``.

    ``waveform`` is taken as one period of a periodic signal (the simulator
    always renders whole PRBS periods); ``start`` is the trigger position in
    source samples.
    """
    if cap.scope_rate is None:
        raise ValueError("capture spec has no scope_rate")
    x = np.asarray(waveform.samples)
    ratio = rate_ratio(cap.scope_rate, waveform.rate)
    up, down = ratio.numerator, ratio.denominator
    n_out = cap.total_samples
    if up == down:
        out = np.take(x, np.arange(start, start + n_out), mode="wrap")
        return Waveform(out, cap.scope_rate)
    c = _pad_cycles(up, down)
    n_in = math.ceil(n_out * down / up) + 1
    seg = np.take(x, np.arange(start - c * down, start + n_in + c * down), mode="wrap")
    y = resample_poly(seg, up, down)
    return Waveform(y[c * up: c * up + n_out], cap.scope_rate)


def raw_bit_count(total_samples: int, scope_rate: float, bit_rate: float) -> int:
    return math.floor(Fraction(total_samples) * Fraction(bit_rate) / Fraction(scope_rate))


def usable_bits(total_samples: int, scope_rate: float, bit_rate: float, period: int = 32767) -> int:
    """Whole PRBS periods guaranteed to fit after aligning to a period start."""
    raw = raw_bit_count(total_samples, scope_rate, bit_rate)
    return max(raw // period - 1, 0) * period


def two_cluster_threshold(x: np.ndarray, iterations: int = 50) -> float:
    """Midpoint between the means of the upper and lower clusters.

    Starts from a median split and refines with 1-D two-means.
    """
    xs = np.sort(np.asarray(x, dtype=float).ravel())
    n = xs.size
    csum = np.concatenate(([0.0], np.cumsum(xs)))
    if n == 0:
        raise ValueError("no samples")
    thr = float(np.median(xs))
    k = int(np.searchsorted(xs, thr, side="right"))
    if k in (0, n):
        # median sits on an extreme level; start from the range midpoint
        thr = 0.5 * (xs[0] + xs[-1])
    for _ in range(iterations):
        k = int(np.searchsorted(xs, thr, side="right"))
        if k == 0 or k == n:
            break
        new = 0.5 * (csum[k] / k + (csum[n] - csum[k]) / (n - k))
        if new == thr:
            break
        thr = new
    return thr


def oversample_capture(capture: Waveform, tx: TxSpec) -> np.ndarray:
    ratio = rate_ratio(SYNC_OVERSAMPLING * tx.bit_rate, capture.rate)
    return resample_poly(np.asarray(capture.samples, dtype=float), ratio.numerator,
                         ratio.denominator, padtype="mean")


def resample_sync(capture: Waveform, tx: TxSpec, cap: CaptureSpec,
                  reference: np.ndarray) -> SyncResult:
    """Re-sample a capture to one value per bit and align it to the PRBS.

    Returns ``usable_bits`` polarity-corrected soft values starting at a PRBS
    period boundary. ``offset`` is the delay in bits of the captured pattern
    relative to the reference: captured bit ``j`` carries ``reference[(j - offset) % P]``.
    """
    ref = np.asarray(reference, dtype=float)
    period = ref.size
    raw = raw_bit_count(len(capture), capture.rate, tx.bit_rate)
    usable = usable_bits(len(capture), capture.rate, tx.bit_rate, period)
    if usable < period:
        raise SyncError(f"capture holds {raw} bits, need at least two PRBS periods ({2 * period})")

    y = oversample_capture(capture, tx)
    phases = y[: raw * SYNC_OVERSAMPLING].reshape(raw, SYNC_OVERSAMPLING).T
    best, best_open, best_thr = 0, -math.inf, 0.0
    for p, soft in enumerate(phases):
        thr = two_cluster_threshold(soft)
        opening = float(np.mean(np.abs(soft - thr)))
        if opening > best_open:
            best, best_open, best_thr = p, opening, thr
    soft = phases[best] - best_thr

    n_fold = raw // period
    folded = soft[: n_fold * period].reshape(n_fold, period).sum(axis=0)
    r = 2 * ref - 1
    corr = np.fft.ifft(np.fft.fft(folded) * np.conj(np.fft.fft(r))).real
    lag = int(np.argmax(np.abs(corr)))
    norm = float(np.linalg.norm(folded)) * math.sqrt(period)
    peak = abs(corr[lag]) / norm if norm > 0 else 0.0
    if peak < SYNC_SIGMA / math.sqrt(period):
        raise SyncError(
            f"PRBS correlation peak {peak:.4g} below threshold {SYNC_SIGMA / math.sqrt(period):.4g}"
        )
    polarity = 1 if corr[lag] > 0 else -1

    start = lag % period
    if start < EDGE_GUARD_BITS and start + period + usable <= raw - EDGE_GUARD_BITS:
        start += period
    aligned = polarity * phases[best][start: start + usable]
    return SyncResult(aligned, lag, polarity, best, peak, start)


def aligned_reference(reference: np.ndarray, n_bits: int) -> np.ndarray:
    reps = -(-n_bits // reference.size)
    return np.tile(np.asarray(reference, dtype=np.uint8), reps)[:n_bits]


def q_factor(soft: np.ndarray, reference_bits: np.ndarray) -> float:
    ones = reference_bits.astype(bool)
    s1, s0 = soft[ones], soft[~ones]
    spread = s1.std() + s0.std()
    return float((s1.mean() - s0.mean()) / spread) if spread > 0 else math.inf


def decide_and_count(soft: np.ndarray, reference_bits: np.ndarray,
                     sequence_index: int) -> SequenceReport:
    soft = np.asarray(soft, dtype=float)
    ref = np.asarray(reference_bits).astype(bool)
    if soft.shape != ref.shape:
        raise ValueError(f"length mismatch: {soft.size} soft values vs {ref.size} reference bits")
    thr = two_cluster_threshold(soft)
    errors = np.flatnonzero((soft > thr) != ref)
    return SequenceReport(sequence_index, int(soft.size), int(errors.size), errors,
                          q_factor(soft, ref))


def eye_points(capture: Waveform, tx: TxSpec, sync: SyncResult, n_bits: int = 1000):
    """Fold the oversampled capture modulo two bit periods.

    Returns ``(phase_in_bits, amplitude)``; bit centres sit at 0.5 and 1.5.
    """
    y = sync.polarity * oversample_capture(capture, tx)
    first = sync.start_bit * SYNC_OVERSAMPLING
    idx = np.arange(first, min(first + n_bits * SYNC_OVERSAMPLING, y.size))
    phase = np.mod((idx - sync.sampling_phase) / SYNC_OVERSAMPLING + 0.5, 2.0)
    return phase, y[idx]


# -- capture files ---------------------------------------------------------

def save_capture(path, capture: Waveform, seed=None) -> None:
    """Write a one-line JSON header followed by little-endian float32 samples."""
    data = np.asarray(capture.samples, dtype="<f4")
    header = {"rate": capture.rate, "length": int(data.size), "seed": seed}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(data.tobytes())


def load_capture(path) -> tuple[Waveform, dict]:
    raw = Path(path).read_bytes()
    head, _, body = raw.partition(b"\n")
    header = json.loads(head)
    data = np.frombuffer(body, dtype="<f4", count=header["length"]).astype(float)
    return Waveform(data, float(header["rate"])), header
