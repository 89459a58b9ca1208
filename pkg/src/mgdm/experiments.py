"""End-to-end experiments: single-channel and four-channel runs, crosstalk sweeps.

Within one block the channel is static and every transmitter sends a
circularly shifted copy of the same PRBS, so the noiseless received field is
periodic in one PRBS period. The link is therefore rendered over a single
period and the scope capture wraps around it; only the noise is drawn over
the full capture length.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .analysis import RunStatistics, ber_stats
from .channel import ChannelRealization, draw_block_channel
from .config import (
    SEED_OPTICAL_NOISE,
    SEED_RECEIVER_NOISE,
    SEED_TRIGGER,
    RunConfig,
    stream,
)
from .mode_catalog import ModeBasis
from .mux_demux import TransferMatrix, build_demux, build_mux
from .transceiver import (
    CaptureSpec,
    SequenceReport,
    SyncResult,
    aligned_reference,
    decide_and_count,
    ook_modulate,
    photodetect,
    prbs,
    resample_sync,
    scope_sample,
)
from .waveform import Waveform, delay_phase

SINGLE_CHANNEL_RATE = 80e9
FOUR_CHANNEL_RATE = 40e9
SINGLE_CHANNEL_SEQUENCES = 20
FOUR_CHANNEL_SEQUENCES = 30


@dataclass(frozen=True, eq=False)
class Link:
    """Devices and transmit pattern shared by all blocks of a run."""

    config: RunConfig
    basis: ModeBasis
    mux: TransferMatrix
    demux: TransferMatrix
    pattern: np.ndarray
    spectrum: np.ndarray  # FFT of one period of the OOK field

    @classmethod
    def build(cls, config: RunConfig) -> "Link":
        basis = ModeBasis.from_orders(config.fiber, config.channels)
        # ports stay in config order, modes in basis order
        pattern = prbs(config.tx.prbs_order, config.tx.prbs_seed)
        field = ook_modulate(pattern, config.tx)
        return cls(config, basis, build_mux(config.mux, basis), build_demux(config.mux, basis),
                   pattern, np.fft.fft(field.samples))

    @property
    def rate(self) -> float:
        return self.config.tx.sample_rate


def port_field_matrices(link: Link, real: ChannelRealization) -> dict[int, np.ndarray]:
    """Per-group port-to-port matrices ``demux @ H[:, g] @ mux[g, :]``.

    The received port fields are ``sum_g A_g @ x(t - tau_g)``.
    """
    out = {}
    for m in link.basis.orders:
        sl = link.basis.group_slice(m)
        out[m] = link.demux.matrix @ real.H.matrix[:, sl] @ link.mux.matrix[sl, :]
    return out


def render_port_fields(link: Link, real: ChannelRealization, active: Iterable[int],
                       receive: Iterable[int]) -> dict[int, Waveform]:
    """Noiseless received fields over one PRBS period.

    Equivalent to ``demux(propagate(mux(decorrelate_ports(field))))`` with the
    silent ports zeroed, evaluated in the frequency domain.
    """
    tx = link.config.tx
    n = link.spectrum.size
    active = list(active)
    mats = port_field_matrices(link, real)
    port_ramps = {j: delay_phase(n, tx.port_delay_bits[j] * tx.samples_per_bit) for j in active}
    group_ramps = {m: delay_phase(n, real.group_delays[m] * link.rate) for m in mats}
    fields = {}
    for p in receive:
        total = np.zeros(n, dtype=complex)
        for m, a in mats.items():
            mix = sum(a[p, j] * port_ramps[j] for j in active)
            total += group_ramps[m] * mix
        fields[p] = Waveform(np.fft.ifft(link.spectrum * total), link.rate)
    return fields


def receiver_gain(field: Waveform, tx) -> float:
    """Power gain of the saturated pre-amplifier: fixed mean output power."""
    power = float(np.mean(np.abs(field.samples) ** 2))
    target = 0.5 * (tx.mark_power + tx.space_power)
    return target / power if power > 0 else 1.0


def capture_port(link: Link, field: Waveform, cap: CaptureSpec, port_seed: np.random.SeedSequence,
                 trigger: int) -> Waveform:
    """Amplify, detect and capture one receiver port.

    Receiver noise is referred to the scope bandwidth: it is added after the
    scope's anti-alias filter, at the capture rate.
    """
    tx = link.config.tx
    noise_seed, optical_seed = port_seed.spawn(2)
    field = Waveform(field.samples * math.sqrt(receiver_gain(field, tx)), field.rate)
    noiseless = replace(cap, electrical_noise_sigma=0.0)
    if math.isfinite(link.config.osnr_db):
        field = _with_optical_noise(link, field, cap, optical_seed)
    current = photodetect(field, noiseless)
    captured = scope_sample(current, cap, start=trigger)
    if cap.electrical_noise_sigma > 0:
        rng = np.random.default_rng(noise_seed)
        samples = captured.samples + rng.normal(0.0, cap.electrical_noise_sigma, len(captured))
        captured = Waveform(samples, captured.rate)
    return captured


def _with_optical_noise(link: Link, field: Waveform, cap: CaptureSpec, seed) -> Waveform:
    """Tile the periodic field over the capture window and add ASE.

    The noise at the port is circular Gaussian with power equal to the port
    signal power divided by the OSNR.
    """
    n_needed = math.ceil(cap.total_samples * link.rate / cap.scope_rate) + 4096
    reps = -(-n_needed // len(field))
    x = np.tile(field.samples, reps)
    signal_power = float(np.mean(np.abs(field.samples) ** 2))
    var = signal_power / 10 ** (link.config.osnr_db / 10)
    rng = np.random.default_rng(seed)
    noise = (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)) * math.sqrt(var / 2)
    return Waveform(x + noise, field.rate)


@dataclass
class BlockResult:
    order: int
    report: SequenceReport
    sync: SyncResult


def _trigger(config: RunConfig, block: int, n: int) -> int:
    rng = np.random.default_rng(stream(config.master_seed, SEED_TRIGGER, block))
    return int(rng.integers(0, n))


def run_block(config: RunConfig, block: int, active: Sequence[int], receive: Sequence[int],
              cap: CaptureSpec, keep_capture: bool = False):
    """Simulate one captured sequence; returns ``BlockResult`` per receive port.

    With ``keep_capture`` the captured waveforms are returned as well.
    """
    link = _cached_link(config)
    real = draw_block_channel(config.crosstalk, config.fiber, link.basis, block)
    fields = render_port_fields(link, real, active, receive)
    results, captures = [], {}
    for p in receive:
        order = config.channels[p]
        port_seed = stream(config.master_seed, SEED_RECEIVER_NOISE, order, block)
        trigger = _trigger(config, block, len(fields[p]))
        capture = capture_port(link, fields[p], cap, port_seed, trigger)
        sync = resample_sync(capture, config.tx, cap, link.pattern)
        ref = aligned_reference(link.pattern, sync.soft.size)
        report = decide_and_count(sync.soft, ref, block)
        results.append(BlockResult(order, report, sync))
        if keep_capture:
            captures[order] = capture
    return (results, captures) if keep_capture else results


@lru_cache(maxsize=4)
def _cached_link(config: RunConfig) -> Link:
    return Link.build(config)


def _run_jobs(jobs, workers: int):
    if workers <= 1:
        return [run_block(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_star_run_block, jobs))


def _star_run_block(job):
    return run_block(*job)


def _capture(config: RunConfig, default_rate: float) -> CaptureSpec:
    cap = config.capture
    return cap if cap.scope_rate is not None else replace(cap, scope_rate=default_rate)


def run_single_channel(config: RunConfig, workers: int = 1,
                       groups: Optional[Sequence[int]] = None) -> RunStatistics:
    """Each channel in turn transmits alone; its own receiver is evaluated."""
    cap = _capture(config, SINGLE_CHANNEL_RATE)
    n_seq = config.sequences or SINGLE_CHANNEL_SEQUENCES
    groups = config.channels if groups is None else groups
    jobs = []
    for m in groups:
        p = config.channels.index(m)
        jobs += [(config, b, (p,), (p,), cap) for b in range(n_seq)]
    reports: dict[int, list[SequenceReport]] = {m: [] for m in groups}
    for block_results in _run_jobs(jobs, workers):
        for res in block_results:
            reports[res.order].append(res.report)
    return ber_stats(reports)


def run_four_channel(config: RunConfig, workers: int = 1) -> RunStatistics:
    """All channels transmit simultaneously over independently drawn blocks."""
    cap = _capture(config, FOUR_CHANNEL_RATE)
    n_seq = config.sequences or FOUR_CHANNEL_SEQUENCES
    ports = tuple(range(len(config.channels)))
    jobs = [(config, b, ports, ports, cap) for b in range(n_seq)]
    reports: dict[int, list[SequenceReport]] = {m: [] for m in config.channels}
    for block_results in _run_jobs(jobs, workers):
        for res in block_results:
            reports[res.order].append(res.report)
    return ber_stats(reports)


def sweep_crosstalk(config: RunConfig, xt_grid: Sequence[float],
                    workers: int = 1) -> list[tuple[float, int, float]]:
    """``(xt_db, channel, average_ber)`` rows.

    Every grid point reuses the same seeds (common random numbers), so
    nested grids agree exactly on shared points.
    """
    if len(xt_grid) == 0:
        raise ValueError("crosstalk grid is empty")
    rows = []
    for xt in xt_grid:
        cfg = config.replace(crosstalk=replace(config.crosstalk, xt_db=float(xt)))
        stats = run_four_channel(cfg, workers)
        rows += [(float(xt), m, s.average_ber) for m, s in stats.channels.items()]
    return rows
