"""Soft and hard demappers for the photon-counting, BSC and AWGN channels.

Every LLR here is ``ln P(obs | bit=1) / P(obs | bit=0)``: natural log, positive
values favor bit 1.  The sum-product decoder depends on this single convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .channel import ChannelParams, check_bit, q_param
from .errors import DegenerateChannel

LN2 = math.log(2.0)
_QINV_BRACKET = 40.0


def llr_slope(phase_diffusion: float) -> float:
    """``ln(q / (1 - q))``: LLR contributed by each photon of excess in arm 0."""
    if not math.isfinite(phase_diffusion):
        raise DegenerateChannel("phase diffusion must be finite")
    q = q_param(phase_diffusion)
    if q >= 0.5:
        raise DegenerateChannel(f"phase diffusion {phase_diffusion!r} leaves no polarization contrast")
    return math.log(q) - math.log1p(-q)


def bimo_llr(params: ChannelParams, outcome) -> float:
    """Exact LLR of a photon-count pair; depends on the counts only through ``n0 - n1``."""
    n0, n1 = outcome
    return (n0 - n1) * llr_slope(params.delta)


def bimo_llrs(params: ChannelParams, n0, n1) -> np.ndarray:
    return (np.asarray(n0) - np.asarray(n1)) * llr_slope(params.delta)


def bsc_llr(qber: float, hard_bit: int) -> float:
    magnitude = bsc_llr_magnitude(qber)
    return magnitude if check_bit(hard_bit) == 1 else -magnitude


def bsc_llr_magnitude(qber: float) -> float:
    if not 0.0 < qber < 0.5:
        raise DegenerateChannel(f"crossover probability must lie in (0, 1/2), got {qber!r}")
    return math.log1p(-qber) - math.log(qber)


def hard_decision(outcome, rng: np.random.Generator) -> int:
    """Majority arm wins; a tie is settled by a fair coin from ``rng``."""
    n0, n1 = outcome
    if n1 > n0:
        return 1
    if n1 < n0:
        return 0
    return int(rng.integers(0, 2))


def hard_decisions(n0, n1, rng: np.random.Generator) -> np.ndarray:
    n0, n1 = np.asarray(n0), np.asarray(n1)
    coins = rng.integers(0, 2, size=n0.shape)
    return np.where(n1 > n0, 1, np.where(n1 < n0, 0, coins)).astype(np.uint8)


def gaussian_tail(x: float) -> float:
    """``Q(x) = P(Z > x)`` for a standard normal ``Z``."""
    return 0.5 * special.erfc(x / math.sqrt(2.0))


def gaussian_tail_inverse(p: float) -> float:
    """Solve ``Q(x) = p`` for ``p`` in (0, 1/2) by bisection."""
    if not 0.0 < p < 0.5:
        raise DegenerateChannel(f"tail probability must lie in (0, 1/2), got {p!r}")
    return optimize.bisect(lambda x: gaussian_tail(x) - p, 0.0, _QINV_BRACKET, xtol=1e-14, rtol=1e-15, maxiter=200)


@dataclass(frozen=True)
class AwgnOperatingPoint:
    """Antipodal +/-1 signalling over real Gaussian noise."""

    symbol_energy_to_noise: float
    noise_std: float

    @classmethod
    def from_es_n0(cls, es_n0: float) -> "AwgnOperatingPoint":
        if not es_n0 > 0:
            raise DegenerateChannel(f"Es/N0 must be positive, got {es_n0!r}")
        return cls(es_n0, 1.0 / math.sqrt(2.0 * es_n0))

    @property
    def uncoded_error(self) -> float:
        return gaussian_tail(math.sqrt(2.0 * self.symbol_energy_to_noise))


def snr_from_qber(target_qber: float) -> AwgnOperatingPoint:
    """Es/N0 at which uncoded antipodal signalling has bit error rate ``target_qber``."""
    x = gaussian_tail_inverse(target_qber)
    return AwgnOperatingPoint.from_es_n0(0.5 * x * x)


def awgn_llr(op_point: AwgnOperatingPoint, y) -> np.ndarray:
    return 2.0 * np.asarray(y) / op_point.noise_std**2


def awgn_sample_llr(op_point: AwgnOperatingPoint, bit: int, rng: np.random.Generator) -> float:
    s = 1.0 if check_bit(bit) == 1 else -1.0
    y = s + op_point.noise_std * rng.standard_normal()
    return float(awgn_llr(op_point, y))


def awgn_sample_llrs(op_point: AwgnOperatingPoint, bits, rng: np.random.Generator) -> np.ndarray:
    bits = np.asarray(bits)
    y = (2.0 * bits - 1.0) + op_point.noise_std * rng.standard_normal(bits.shape)
    return awgn_llr(op_point, y)


def llr_table(phase_diffusion: float, cap: int):
    """Rows ``(n0, n1, llr_nat, llr_log2)`` for every outcome with ``n0 + n1 <= cap``."""
    slope = llr_slope(phase_diffusion)
    rows = []
    for total in range(cap + 1):
        for n0 in range(total + 1):
            n1 = total - n0
            nat = (n0 - n1) * slope + 0.0
            rows.append((n0, n1, nat, nat / LN2))
    return rows

