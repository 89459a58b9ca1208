"""Reed-Solomon overhead, post-FEC error bound and net-rate arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

POST_FEC_TARGET = 1e-12


@dataclass(frozen=True)
class FecSpec:
    """RS(n, k) code over ``b``-bit symbols; corrects ``t`` symbol errors."""

    n: int = 1023
    k: int = 911
    b: int = 10

    def __post_init__(self):
        if not 0 < self.k < self.n <= 2 ** self.b - 1:
            raise ValueError(f"need 0 < k < n <= 2^b - 1, got n={self.n}, k={self.k}, b={self.b}")
        if self.t < 1:
            raise ValueError("code must correct at least one symbol (t >= 1)")

    @property
    def t(self) -> int:
        return (self.n - self.k) // 2


def overhead(spec: FecSpec) -> float:
    return (spec.n - spec.k) / spec.k


def symbol_error_probability(pre_ber: float, b: int) -> float:
    """``1 - (1 - p)^b`` for independent bit errors, without cancellation."""
    return -math.expm1(b * math.log1p(-pre_ber))


def _log_binomial_terms(p: float, n: int, i: np.ndarray) -> np.ndarray:
    log_binom = (math.lgamma(n + 1)
                 - np.array([math.lgamma(j + 1) + math.lgamma(n - j + 1) for j in i]))
    return log_binom + i * math.log(p) + (n - i) * math.log1p(-p)


def codeword_failure_probability(p_symbol: float, n: int, t: int) -> float:
    """Binomial tail ``P(more than t of n symbols in error)``, in log domain.

    When the tail is large, one minus the lower sum is used instead so the
    result stays accurate close to one.
    """
    if p_symbol <= 0:
        return 0.0
    if p_symbol >= 1:
        return 1.0 if t < n else 0.0
    if t + 1 > n * p_symbol:
        upper = _log_binomial_terms(p_symbol, n, np.arange(t + 1, n + 1))
        return float(min(1.0, math.exp(logsumexp(upper))))
    lower = _log_binomial_terms(p_symbol, n, np.arange(0, t + 1))
    return float(max(0.0, -math.expm1(logsumexp(lower))))


def post_fec_bound(pre_ber: float, spec: FecSpec) -> float:
    """Upper bound on the post-FEC BER of a hard-decision RS decoder.

    Assumes memoryless bit errors. Any decoded bit error requires a codeword
    with more than ``t`` symbol errors, so the codeword failure probability
    bounds the output BER.
    """
    if not 0 <= pre_ber <= 0.5:
        raise ValueError(f"pre-FEC BER must lie in [0, 0.5], got {pre_ber}")
    if pre_ber == 0:
        return 0.0
    return codeword_failure_probability(symbol_error_probability(pre_ber, spec.b), spec.n, spec.t)


def _decimal(x) -> Fraction:
    return Fraction(repr(x)) if isinstance(x, float) else Fraction(x)


def net_bit_rate(lanes: int, lane_rate: float, overhead: float) -> float:
    """``lanes * lane_rate / (1 + overhead)``.

    Inputs are read as the decimals they print as, so round figures such as
    ``overhead=0.12`` give round results.
    """
    if lanes <= 0 or not lane_rate > 0 or not overhead >= 0:
        raise ValueError("lanes and lane_rate must be positive, overhead non-negative")
    return float(lanes * _decimal(lane_rate) / (1 + _decimal(overhead)))


def budget_table(spec: FecSpec, pre_bers) -> list[tuple[float, float, bool]]:
    """``(pre_ber, bound, bound < target)`` rows for a grid of pre-FEC BERs."""
    rows = []
    for p in pre_bers:
        bound = post_fec_bound(p, spec)
        rows.append((p, bound, bound < POST_FEC_TARGET))
    return rows
