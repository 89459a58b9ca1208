"""Block-constant 5 km GI-MMF channel.

One captured sequence sees one channel realisation. Within each mode group
the modes mix through a random unitary whose strength is set by
``intra_coupling``; between groups a weak coupling of mean power ``xt_db``
leaks energy. Each block redraws the
intra-group mixing and perturbs the inter-group coupling by ``drift_sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import linalg
from scipy.stats import unitary_group

from .errors import DimensionMismatchError, RateMismatchError
from .mode_catalog import FiberSpec, ModeBasis, group_delay, propagation_constant
from .mux_demux import TransferMatrix
from .waveform import Waveform, fractional_delay

DriftMode = Literal["redraw", "random_walk"]

# spawn keys below CrosstalkSpec.seed
_BASE_COUPLING = 0
_BLOCK_COUPLING = 1
_INTRA = 2


@dataclass(frozen=True)
class CrosstalkSpec:
    """Inter-group crosstalk and its drift between captured sequences.

    Parameters
    ----------
    xt_db : mean off-group / in-group power ratio per excited mode [dB]
    drift_sigma : scale of the per-block perturbation of the coupling
        amplitudes relative to the static part; large values approach an
        independent redraw per block
    seed : channel randomness seed
    drift_mode : ``"redraw"`` perturbs a static coupling independently per
        block; ``"random_walk"`` makes successive blocks correlated
    intra_coupling : strength ``s`` of the intra-group mixing; finite values
        use ``expm(i*s*H)`` with ``H`` from the GUE, ``inf`` draws Haar
        unitaries (complete mixing)
    """

    xt_db: float = -16.0
    drift_sigma: float = 10.0
    seed: int = 3
    drift_mode: DriftMode = "redraw"
    intra_coupling: float = 0.6

    def __post_init__(self):
        if not self.xt_db <= 0:
            raise ValueError("xt_db must be <= 0")
        if not self.drift_sigma >= 0:
            raise ValueError("drift_sigma must be >= 0")
        if self.drift_mode not in ("redraw", "random_walk"):
            raise ValueError(f"unknown drift_mode {self.drift_mode!r}")
        if not self.intra_coupling >= 0:
            raise ValueError("intra_coupling must be >= 0")

    @property
    def xt_linear(self) -> float:
        return 0.0 if self.xt_db == -math.inf else 10 ** (self.xt_db / 10)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Channel of one captured block.

    ``group_delays`` maps group order to its delay [s] relative to the
    fastest group of the basis; the common fiber latency is dropped.
    """

    block_index: int
    H: TransferMatrix
    group_delays: dict[int, float]


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _coupling_scales(group_sizes: np.ndarray) -> np.ndarray:
    """Symmetric per-entry variances ``x_i * x_j`` on the off-group support
    whose column sums are all one (symmetric Sinkhorn scaling)."""
    n = len(group_sizes)
    support = group_sizes[:, None] != group_sizes[None, :]
    x = np.ones(n)
    for _ in range(200):
        col = support.T @ x
        x_new = np.sqrt(x / col)
        if np.allclose(x_new, x, rtol=1e-14, atol=0):
            break
        x = x_new
    return support * np.outer(x, x)


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def _coupling_draw(spec: CrosstalkSpec, n: int, block_index: int) -> np.ndarray:
    """Unit-variance complex Gaussian coupling field for ``block_index``."""
    sigma = spec.drift_sigma
    if spec.drift_mode == "redraw":
        base = _complex_gaussian(_rng(spec.seed, _BASE_COUPLING), (n, n))
        step = _complex_gaussian(_rng(spec.seed, _BLOCK_COUPLING, block_index), (n, n))
        return (base + sigma * step) / math.sqrt(1 + sigma * sigma)
    rho = 1 / math.sqrt(1 + sigma * sigma)
    x = _complex_gaussian(_rng(spec.seed, _BLOCK_COUPLING, 0), (n, n))
    for b in range(1, block_index + 1):
        step = _complex_gaussian(_rng(spec.seed, _BLOCK_COUPLING, b), (n, n))
        x = rho * x + math.sqrt(1 - rho * rho) * step
    return x


def _intra_unitary(spec: CrosstalkSpec, dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.array([[np.exp(2j * np.pi * rng.uniform())]])
    if math.isinf(spec.intra_coupling):
        return unitary_group.rvs(dim, random_state=rng)
    a = _complex_gaussian(rng, (dim, dim))
    herm = (a + a.conj().T) / 2
    return linalg.expm(1j * spec.intra_coupling * herm)


def draw_block_channel(
    spec: CrosstalkSpec, fiber: FiberSpec, basis: ModeBasis, block_index: int
) -> ChannelRealization:
    """Channel matrix ``H = Q @ D`` of one block; a pure function of its inputs."""
    if len(basis) == 0:
        raise ValueError("mode basis is empty")
    if block_index < 0:
        raise ValueError("block_index must be >= 0")
    n = len(basis)
    orders = basis.group_of_index()
    sizes = np.array([len(basis.groups[basis.orders.index(m)]) for m in orders])

    rng_intra = _rng(spec.seed, _INTRA, block_index)
    blocks = [_intra_unitary(spec, len(g), rng_intra) for g in basis.groups]
    q = linalg.block_diag(*blocks).astype(complex)

    r = spec.xt_linear
    if r > 0:
        p = r / (1 + r)
        x = _coupling_draw(spec, n, block_index) * np.sqrt(p * _coupling_scales(sizes))
        gen = (x - x.conj().T) / math.sqrt(2)
        q = q @ linalg.expm(gen)

    phases = np.array(
        [math.fmod(propagation_constant(int(m), fiber) * fiber.L, 2 * math.pi) for m in orders]
    )
    h = q * np.exp(1j * phases)[None, :]
    if r > 0:
        h, _ = linalg.polar(h)

    labels = tuple(mode.label for mode in basis.modes)
    delays = {m: group_delay(m, fiber) * fiber.L for m in basis.orders}
    t0 = min(delays.values())
    return ChannelRealization(
        block_index,
        TransferMatrix(h, labels, labels),
        {m: d - t0 for m, d in delays.items()},
    )


def _stack(waveforms: Waveform | Sequence[Waveform]) -> Waveform:
    if isinstance(waveforms, Waveform):
        return waveforms
    rates = {w.rate for w in waveforms}
    if len(rates) != 1:
        raise RateMismatchError(f"waveforms have differing sample rates {sorted(rates)}")
    return Waveform(np.stack([w.samples for w in waveforms]), rates.pop())


def propagate(waveforms: Waveform | Sequence[Waveform], real: ChannelRealization,
              basis: ModeBasis) -> Waveform:
    """Delay each group's mode fields by its group delay, then mix them by ``H``."""
    wf = _stack(waveforms)
    x = np.asarray(wf.samples)
    if x.ndim != 2 or x.shape[0] != len(basis) or len(real.H.inputs) != len(basis):
        raise DimensionMismatchError("need exactly one waveform per basis mode")
    out = np.empty(x.shape, dtype=complex)
    for m in basis.orders:
        sl = basis.group_slice(m)
        out[sl] = fractional_delay(x[sl], real.group_delays[m] * wf.rate)
    return Waveform(real.H.matrix @ out, wf.rate)


def add_optical_noise(waveforms: Waveform, osnr_db: float, seed) -> Waveform:
    """Add spatially white circular Gaussian noise (amplifier ASE).

    The noise is shared equally among the modes; its total power over the
    simulation bandwidth is the total signal power divided by ``10**(osnr_db/10)``.
    """
    if osnr_db == math.inf:
        return waveforms
    x = np.atleast_2d(waveforms.samples)
    signal_power = float(np.mean(np.sum(np.abs(x) ** 2, axis=0)))
    per_mode_var = signal_power / x.shape[0] / 10 ** (osnr_db / 10)
    rng = np.random.default_rng(seed)
    noise = _complex_gaussian(rng, x.shape) * math.sqrt(per_mode_var)
    return Waveform((x + noise).reshape(np.shape(waveforms.samples)), waveforms.rate)
