import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgdm.errors import (
    DomainMismatchError,
    InvalidIndexError,
    InvalidOrderError,
    NotGuidedError,
    UnsupportedProfileError,
)
from mgdm.mode_catalog import (
    C0,
    FiberSpec,
    LpMode,
    ModeBasis,
    PolarGrid,
    enumerate_group,
    group_delay,
    group_order,
    mode_field,
    overlap,
    propagation_constant,
    sample_field,
)

FIBER = FiberSpec()

# closed form evaluated with mpmath at 40 digits
BETA_MG3 = 5953232.330105845360826703
BETA_MG6 = 5936221.330052321051077878


def labels(m):
    return [mode.label for mode in enumerate_group(m)]


@pytest.mark.parametrize("nu,mu,m", [(0, 2, 5), (2, 1, 5), (0, 1, 3), (3, 1, 6), (1, 2, 6)])
def test_group_order(nu, mu, m):
    assert group_order(nu, mu) == m


@pytest.mark.parametrize("nu,mu", [(0, 0), (-1, 1), (2, -3)])
def test_group_order_rejects_bad_indices(nu, mu):
    with pytest.raises(InvalidIndexError):
        group_order(nu, mu)


def test_enumerate_small_groups():
    assert labels(3) == ["LP01"]
    assert labels(4) == ["LP11a", "LP11b"]
    assert labels(5) == ["LP02", "LP21a", "LP21b"]
    assert labels(6) == ["LP12a", "LP12b", "LP31a", "LP31b"]


@pytest.mark.parametrize("m", range(3, 16))
def test_group_members_brute_force(m):
    brute = set()
    for nu in range(m):
        for mu in range(1, m):
            if nu + 2 * mu + 1 == m:
                brute |= {LpMode(nu, mu, o) for o in ("ab" if nu else "a")}
    group = enumerate_group(m)
    assert set(group.members) == brute
    assert len(group) == m - 2
    assert list(group.members) == sorted(group.members)


@pytest.mark.parametrize("m", [2, 0, -4])
def test_enumerate_rejects_low_order(m):
    with pytest.raises(InvalidOrderError):
        enumerate_group(m)


def test_lp_mode_rules():
    with pytest.raises(ValueError):
        LpMode(0, 1, "b")
    with pytest.raises(ValueError):
        LpMode(1, 0)
    assert LpMode.parse("LP21b") == LpMode(2, 1, "b")
    assert LpMode.parse(LpMode(10, 1, "a").label) == LpMode(10, 1, "a")


def test_beta_against_high_precision_oracle():
    assert propagation_constant(3, FIBER) == pytest.approx(BETA_MG3, rel=1e-14)
    assert propagation_constant(6, FIBER) == pytest.approx(BETA_MG6, rel=1e-14)


def test_beta_is_group_property_and_below_plane_wave():
    nk = FIBER.n1 * FIBER.k0
    for m in range(3, 7):
        betas = {propagation_constant(mode, FIBER) for mode in enumerate_group(m)}
        assert len(betas) == 1
        assert betas.pop() < nk
    assert propagation_constant(LpMode(0, 2), FIBER) == propagation_constant(LpMode(2, 1, "a"), FIBER)


def test_not_guided_and_unsupported_profile():
    with pytest.raises(NotGuidedError):
        propagation_constant(10**6, FIBER)
    step = FiberSpec(alpha=1.8)
    with pytest.raises(UnsupportedProfileError):
        propagation_constant(3, step)
    with pytest.raises(UnsupportedProfileError):
        mode_field(LpMode(0, 1), step, 0.0, 0.0)


def _beta_at(omega, fiber, m):
    lam = 2 * math.pi * C0 / omega
    delta = fiber.delta * (omega / fiber.omega) ** (fiber.epsilon / 2)
    return propagation_constant(m, FiberSpec(a=fiber.a, n1=fiber.n1, delta=delta, lambda_=lam,
                                             L=fiber.L, epsilon=fiber.epsilon))


@pytest.mark.parametrize("eps", [0.0, -0.2, 0.3])
@pytest.mark.parametrize("m", [3, 4, 5, 6])
def test_group_delay_matches_finite_difference(m, eps):
    fiber = FiberSpec(epsilon=eps)
    w = fiber.omega
    h = w * 1e-6
    fd = (_beta_at(w + h, fiber, m) - _beta_at(w - h, fiber, m)) / (2 * h)
    assert group_delay(m, fiber) == pytest.approx(fd, rel=1e-6)


def test_group_delay_monotone_and_degenerate():
    taus = [group_delay(m, FIBER) for m in range(3, 7)]
    assert all(a != b for a, b in zip(taus, taus[1:]))
    assert np.all(np.diff(taus) < 0) or np.all(np.diff(taus) > 0)
    # magnitude: about n1/c per metre
    assert taus[0] == pytest.approx(FIBER.n1 / C0, rel=1e-2)


def test_fields_on_axis():
    assert mode_field(LpMode(0, 1), FIBER, 0.0, 0.0) > 0
    r = np.linspace(0, 3 * FIBER.a, 500)
    assert np.argmax(np.abs(mode_field(LpMode(0, 1), FIBER, r, 0.0))) == 0
    for mode in [LpMode(1, 1, "a"), LpMode(2, 1, "b"), LpMode(3, 1, "a"), LpMode(1, 2, "a")]:
        assert mode_field(mode, FIBER, 0.0, 0.3) == 0


def _cartesian_norm(mode, n=801):
    # independent rule: uniform Cartesian trapezoid over a square
    half = 3 * FIBER.a
    x = np.linspace(-half, half, n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    psi = mode_field(mode, FIBER, np.hypot(xx, yy), np.arctan2(yy, xx))
    dx = x[1] - x[0]
    return float(np.sum(psi ** 2) * dx * dx)


@pytest.mark.parametrize("mode", [LpMode(0, 1), LpMode(1, 1, "b"), LpMode(0, 2), LpMode(3, 1, "a")])
def test_unit_power_cartesian_oracle(mode):
    assert _cartesian_norm(mode) == pytest.approx(1.0, abs=1e-6)


def test_overlap_self_and_cross():
    a = sample_field(LpMode(0, 1), FIBER)
    b = sample_field(LpMode(1, 1, "a"), FIBER)
    assert abs(overlap(a, a) - 1) < 1e-6
    assert abs(overlap(a, b)) < 1e-6


def test_gram_identity():
    gram = ModeBasis.from_orders(FIBER).gram_matrix()
    assert gram.shape == (10, 10)
    assert np.max(np.abs(gram - np.eye(10))) < 1e-6


def test_overlap_domain_mismatch():
    a = sample_field(LpMode(0, 1), FIBER)
    b = sample_field(LpMode(0, 1), FIBER, PolarGrid.for_fiber(FIBER, n_r=128))
    with pytest.raises(DomainMismatchError):
        overlap(a, b)


def test_basis_index_is_bijection():
    basis = ModeBasis.from_orders(FIBER)
    assert [basis.index(mode) for mode in basis.modes] == list(range(len(basis)))
    assert basis.modes[basis.group_slice(5)] == enumerate_group(5).members
    with pytest.raises(ValueError):
        ModeBasis.from_orders(FIBER, (3, 3))


@settings(max_examples=40, deadline=None)
@given(m=st.integers(3, 12), a=st.floats(10e-6, 40e-6), delta=st.floats(0.002, 0.02))
def test_beta_squared_step_constant(m, a, delta):
    fiber = FiberSpec(a=a, delta=delta)
    step = propagation_constant(m, fiber) ** 2 - propagation_constant(m + 1, fiber) ** 2
    expected = 2 * fiber.n1 * fiber.k0 * math.sqrt(2 * delta) / a
    assert step == pytest.approx(expected, rel=1e-6)
