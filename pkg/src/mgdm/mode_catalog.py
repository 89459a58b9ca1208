"""LP-mode and mode-group algebra for power-law graded-index fiber.

Mode groups use the convention ``m = nu + 2*mu + 1`` so that LP01 belongs to
group 3. This is the common principal mode number plus two.

Propagation constants, group delays and mode fields use the closed forms of
the infinite parabolic profile (``alpha == 2``). In that model every member
of a group has exactly the same propagation constant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Sequence

import numpy as np
from scipy import special

from .errors import (
    DomainMismatchError,
    InvalidIndexError,
    InvalidOrderError,
    NotGuidedError,
    UnsupportedProfileError,
)

C0 = 299_792_458.0  # m/s

Orientation = Literal["a", "b"]

_LABEL_RE = re.compile(r"^LP(?:(\d)(\d)|(\d+),(\d+))([ab]?)$")


@dataclass(frozen=True, order=True)
class LpMode:
    """Scalar LP mode with azimuthal order ``nu`` and radial order ``mu``.

    ``orientation`` selects the ``cos(nu*phi)`` ("a") or ``sin(nu*phi)`` ("b")
    azimuthal variant. Modes with ``nu == 0`` only exist as "a".
    """

    nu: int
    mu: int
    orientation: Orientation = "a"

    def __post_init__(self):
        if self.nu < 0 or self.mu < 1:
            raise InvalidIndexError(f"invalid LP indices nu={self.nu}, mu={self.mu}")
        if self.orientation not in ("a", "b"):
            raise InvalidIndexError(f"orientation must be 'a' or 'b', got {self.orientation!r}")
        if self.nu == 0 and self.orientation != "a":
            raise InvalidIndexError("LP0mu modes have no 'b' orientation")

    @property
    def order(self) -> int:
        return group_order(self.nu, self.mu)

    @property
    def label(self) -> str:
        if self.nu < 10 and self.mu < 10:
            core = f"LP{self.nu}{self.mu}"
        else:
            core = f"LP{self.nu},{self.mu}"
        return core if self.nu == 0 else core + self.orientation

    @classmethod
    def parse(cls, label: str) -> "LpMode":
        """Parse labels such as ``"LP01"``, ``"LP21b"`` or ``"LP10,1a"``."""
        match = _LABEL_RE.match(label.strip())
        if match is None:
            raise InvalidIndexError(f"cannot parse mode label {label!r}")
        d1, d2, n1, n2, orient = match.groups()
        nu, mu = (int(d1), int(d2)) if d1 is not None else (int(n1), int(n2))
        return cls(nu, mu, orient or "a")

    def __str__(self):
        return self.label


def group_order(nu: int, mu: int) -> int:
    """Mode-group order ``m = nu + 2*mu + 1``."""
    if nu < 0 or mu < 1:
        raise InvalidIndexError(f"invalid LP indices nu={nu}, mu={mu}")
    return nu + 2 * mu + 1


@dataclass(frozen=True)
class ModeGroup:
    order: int
    members: tuple[LpMode, ...]

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, mode):
        return mode in self.members


def enumerate_group(m: int) -> ModeGroup:
    """All LP modes of group ``m``, sorted by ``(nu, mu, orientation)``."""
    if m < 3:
        raise InvalidOrderError(f"mode-group order must be >= 3, got {m}")
    members = []
    for mu in range(1, (m - 1) // 2 + 1):
        nu = m - 1 - 2 * mu
        if nu < 0:
            continue
        if nu == 0:
            members.append(LpMode(0, mu, "a"))
        else:
            members.append(LpMode(nu, mu, "a"))
            members.append(LpMode(nu, mu, "b"))
    return ModeGroup(m, tuple(sorted(members)))


@dataclass(frozen=True)
class FiberSpec:
    """Power-law graded-index fiber.

    Parameters
    ----------
    a : core radius [m]
    n1 : on-axis refractive index
    delta : relative index difference
    alpha : profile exponent (2 = parabolic)
    L : length [m]
    lambda_ : vacuum wavelength [m] (``"lambda"`` in config files)
    epsilon : profile-dispersion parameter, ``2*(omega/delta)*d(delta)/d(omega)``
    """

    a: float = 25e-6
    n1: float = 1.47
    delta: float = 0.01
    alpha: float = 2.0
    L: float = 5000.0
    lambda_: float = 1550e-9
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("core radius a must be > 0")
        if not 0 < self.delta < 0.05:
            raise ValueError("delta must lie in (0, 0.05)")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not self.L >= 0:
            raise ValueError("length L must be >= 0")
        if not self.lambda_ > 0:
            raise ValueError("wavelength must be > 0")
        if not self.n1 > 0:
            raise ValueError("n1 must be > 0")

    @property
    def k0(self) -> float:
        return 2 * math.pi / self.lambda_

    @property
    def omega(self) -> float:
        return 2 * math.pi * C0 / self.lambda_

    @property
    def spot_radius(self) -> float:
        """1/e field radius ``w`` of the fundamental mode."""
        _require_parabolic(self)
        return math.sqrt(2 * self.a / (self.n1 * self.k0 * math.sqrt(2 * self.delta)))


def _require_parabolic(fiber: FiberSpec):
    if fiber.alpha != 2:
        raise UnsupportedProfileError(
            f"analytic branch requires alpha == 2, got alpha = {fiber.alpha}"
        )


def _beta_squared(m: int, n1: float, delta: float, a: float, k: float) -> float:
    nk = n1 * k
    return nk * nk - 2.0 * nk * math.sqrt(2.0 * delta) * (m - 2) / a


def propagation_constant(mode: LpMode | int, fiber: FiberSpec) -> float:
    """Propagation constant [rad/m]; depends only on the group order.

    ``mode`` may be an :class:`LpMode` or a group order.
    """
    _require_parabolic(fiber)
    m = mode.order if isinstance(mode, LpMode) else int(mode)
    if m < 3:
        raise InvalidOrderError(f"mode-group order must be >= 3, got {m}")
    b2 = _beta_squared(m, fiber.n1, fiber.delta, fiber.a, fiber.k0)
    if b2 <= 0:
        raise NotGuidedError(f"group {m} is not guided on this fiber")
    return math.sqrt(b2)


def group_delay(m: int, fiber: FiberSpec) -> float:
    """Group delay per unit length ``d(beta)/d(omega)`` [s/m] of group ``m``.

    ``n1`` is taken as dispersionless. ``delta`` follows the profile-dispersion
    parameter ``epsilon`` (zero means frequency independent).
    """
    beta = propagation_constant(m, fiber)
    k = fiber.k0
    sq = math.sqrt(2.0 * fiber.delta)
    # d(beta^2)/d(omega) / 2
    half_db2 = (fiber.n1 ** 2 * k - fiber.n1 * (m - 2) * sq * (1 + fiber.epsilon / 4) / fiber.a) / C0
    return half_db2 / beta


def mode_field(mode: LpMode, fiber: FiberSpec, r, phi):
    """Unit-norm Laguerre-Gauss field of ``mode`` at polar coordinates [1/m]."""
    _require_parabolic(fiber)
    w = fiber.spot_radius
    nu, p = mode.nu, mode.mu - 1
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    x = 2.0 * r * r / (w * w)
    radial = np.sqrt(x) ** nu * special.eval_genlaguerre(p, nu, x) * np.exp(-x / 2)
    if nu == 0:
        angular = np.ones_like(phi)
        ang_norm = 2 * math.pi
    else:
        angular = np.cos(nu * phi) if mode.orientation == "a" else np.sin(nu * phi)
        ang_norm = math.pi
    # integral of x^nu L^2 e^-x over x is (p+nu)!/p!; r dr = w^2 dx / 4
    log_norm = -0.5 * (
        math.log(w * w / 4) + special.gammaln(p + nu + 1) - special.gammaln(p + 1) + math.log(ang_norm)
    )
    return math.exp(log_norm) * radial * angular


# -- quadrature ------------------------------------------------------------

RADIAL_NODES = 256
AZIMUTH_NODES = 64
RADIAL_EXTENT = 3.0  # in core radii


@dataclass(frozen=True)
class PolarGrid:
    """Tensor quadrature grid: Gauss-Legendre in r, uniform trapezoid in phi.

    The azimuthal rule integrates trigonometric polynomials of degree below
    ``n_phi`` exactly, so overlaps of modes with ``nu < n_phi / 2`` carry no
    angular error.
    """

    r_max: float
    n_r: int = RADIAL_NODES
    n_phi: int = AZIMUTH_NODES

    @cached_property
    def nodes(self):
        xg, wg = np.polynomial.legendre.leggauss(self.n_r)
        r = 0.5 * self.r_max * (xg + 1)
        wr = 0.5 * self.r_max * wg * r
        phi = 2 * np.pi * np.arange(self.n_phi) / self.n_phi
        wphi = np.full(self.n_phi, 2 * np.pi / self.n_phi)
        rr, pp = np.meshgrid(r, phi, indexing="ij")
        return rr, pp, np.outer(wr, wphi)

    @classmethod
    def for_fiber(cls, fiber: FiberSpec, n_r=RADIAL_NODES, n_phi=AZIMUTH_NODES):
        return cls(RADIAL_EXTENT * fiber.a, n_r, n_phi)


@dataclass(frozen=True, eq=False)
class SampledField:
    values: np.ndarray
    grid: PolarGrid


def sample_field(mode: LpMode, fiber: FiberSpec, grid: PolarGrid | None = None) -> SampledField:
    grid = grid or PolarGrid.for_fiber(fiber)
    rr, pp, _ = grid.nodes
    return SampledField(mode_field(mode, fiber, rr, pp).astype(complex), grid)


def overlap(f: SampledField, g: SampledField) -> complex:
    """Inner product ``integral f * conj(g) dA`` on the shared quadrature grid."""
    if f.grid != g.grid:
        raise DomainMismatchError("fields are sampled on different grids")
    _, _, w = f.grid.nodes
    return complex(np.sum(w * f.values * np.conj(g.values)))


@dataclass(frozen=True)
class ModeBasis:
    """Ordered set of mode groups with a flat mode index."""

    fiber: FiberSpec
    groups: tuple[ModeGroup, ...]
    modes: tuple[LpMode, ...] = field(init=False)

    def __post_init__(self):
        modes = tuple(mode for g in self.groups for mode in g)
        if len(set(modes)) != len(modes):
            raise ValueError("duplicate modes in basis")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def from_orders(cls, fiber: FiberSpec, orders: Sequence[int] = (3, 4, 5, 6)) -> "ModeBasis":
        if len(set(orders)) != len(orders):
            raise ValueError("group orders must be distinct")
        return cls(fiber, tuple(enumerate_group(m) for m in sorted(orders)))

    def __len__(self):
        return len(self.modes)

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(g.order for g in self.groups)

    def index(self, mode: LpMode) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise KeyError(mode) from None

    def group_slice(self, m: int) -> slice:
        start = 0
        for g in self.groups:
            if g.order == m:
                return slice(start, start + len(g))
            start += len(g)
        raise KeyError(m)

    def group_of_index(self) -> np.ndarray:
        """Group order of every flat index."""
        return np.array([mode.order for mode in self.modes])

    def gram_matrix(self, grid: PolarGrid | None = None) -> np.ndarray:
        grid = grid or PolarGrid.for_fiber(self.fiber)
        fields = [sample_field(mode, self.fiber, grid) for mode in self.modes]
        n = len(fields)
        gram = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                gram[i, j] = overlap(fields[i], fields[j])
        return gram
