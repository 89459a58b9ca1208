"""Spatial 4:1 multiplexer and 1:4 de-multiplexer as complex transfer matrices.

Each mux port converts the LP01 mode of its input SMF into one target fiber
mode. Imperfect mode selection leaks a fraction of the port power into every
other basis mode with a seeded random phase. The de-multiplexer is the same
device used backwards; its SMF output pigtails act as modal filters, so each
port returns the projection of the fiber field onto its selected mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, TargetNotInBasisError
from .mode_catalog import LpMode, ModeBasis

PASSIVITY_TOL = 1e-9

# SeedSequence spawn keys for the two physically distinct devices.
_MUX_STREAM = 0
_DEMUX_STREAM = 1

DEFAULT_PORTS = (LpMode(0, 1), LpMode(1, 1, "a"), LpMode(0, 2), LpMode(3, 1, "a"))


@dataclass(frozen=True)
class MuxSpec:
    ports: tuple[LpMode, ...] = DEFAULT_PORTS
    selectivity_db: float = 30.0
    insertion_loss_db: float = 5.0
    seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(self.ports))
        if not self.selectivity_db >= 0:
            raise ValueError("selectivity_db must be >= 0")
        if not self.insertion_loss_db >= 0:
            raise ValueError("insertion_loss_db must be >= 0")
        orders = [p.order for p in self.ports]
        if len(set(orders)) != len(orders):
            raise ValueError("mux targets must lie in pairwise distinct mode groups")

    def with_ports(self, ports: Sequence[LpMode]) -> "MuxSpec":
        return MuxSpec(tuple(ports), self.selectivity_db, self.insertion_loss_db, self.seed)


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Complex linear map ``out = matrix @ in`` with labelled axes."""

    matrix: np.ndarray
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]

    def __post_init__(self):
        if self.matrix.shape != (len(self.outputs), len(self.inputs)):
            raise DimensionMismatchError(
                f"matrix shape {self.matrix.shape} does not match labels "
                f"({len(self.outputs)} outputs, {len(self.inputs)} inputs)"
            )

    @property
    def max_singular_value(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def is_passive(self, tol: float = PASSIVITY_TOL) -> bool:
        return self.max_singular_value <= 1 + tol

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        if self.inputs != other.outputs:
            raise DimensionMismatchError("label mismatch in transfer-matrix product")
        return TransferMatrix(self.matrix @ other.matrix, other.inputs, self.outputs)


def port_labels(n: int) -> tuple[str, ...]:
    return tuple(f"port{i}" for i in range(n))


def _leaky_columns(spec: MuxSpec, basis: ModeBasis, stream: int) -> np.ndarray:
    targets = []
    for mode in spec.ports:
        try:
            targets.append(basis.index(mode))
        except KeyError:
            raise TargetNotInBasisError(f"mux target {mode} is not in the mode basis") from None

    gain = 10 ** (-spec.insertion_loss_db / 20)
    leak = gain * 10 ** (-spec.selectivity_db / 20) if math.isfinite(spec.selectivity_db) else 0.0
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(stream,)))
    theta = rng.uniform(0, 2 * np.pi, size=(len(basis), len(spec.ports)))

    cols = leak * np.exp(1j * theta)
    for j, t in enumerate(targets):
        cols[t, j] = gain
    power = np.sum(np.abs(cols) ** 2, axis=0)
    cols = cols / np.sqrt(np.maximum(power, 1.0))
    # Unit-power columns can still overlap; cap the largest singular value.
    smax = np.linalg.norm(cols, 2)
    if smax > 1:
        cols = cols / smax
    return cols


def build_mux(spec: MuxSpec, basis: ModeBasis) -> TransferMatrix:
    """Ports -> fiber modes."""
    cols = _leaky_columns(spec, basis, _MUX_STREAM)
    labels = tuple(m.label for m in basis.modes)
    return TransferMatrix(cols, port_labels(len(spec.ports)), labels)


def build_demux(spec: MuxSpec, basis: ModeBasis) -> TransferMatrix:
    """Fiber modes -> ports: the conjugate transpose of a mux-type device.

    The leakage phases come from an independent stream of ``spec.seed`` so the
    receiver device is not a mirror image of the transmitter device.
    """
    cols = _leaky_columns(spec, basis, _DEMUX_STREAM)
    labels = tuple(m.label for m in basis.modes)
    return TransferMatrix(cols.conj().T, labels, port_labels(len(spec.ports)))


def apply_transfer(T: TransferMatrix, v: np.ndarray) -> np.ndarray:
    """Apply ``T`` to a vector, or to each column of a (inputs, samples) array."""
    v = np.asarray(v)
    if v.shape[0] != len(T.inputs):
        raise DimensionMismatchError(
            f"vector of length {v.shape[0]} applied to matrix with {len(T.inputs)} inputs"
        )
    return T.matrix @ v
