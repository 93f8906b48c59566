"""Photon-counting binary channel: arm means, outcome laws, QBER and sampling.

A bit ``k`` is sent as a polarization phase shift (``pi/4`` for 0, ``3pi/4``
for 1) on a coherent carrier with mean photon number ``N_c``.  The receiver
counts photons in the reflected (``n0``) and transmitted (``n1``) arms of a
polarizing beam splitter.  Both counts are independent Poisson variables whose
means depend on the phase and on the phase-diffusion width ``delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize, special

from .errors import TargetUnreachable

PHASES = (math.pi / 4, 3 * math.pi / 4)
# cos(phase) for bit 0 and bit 1; kept as exact negatives of each other so the
# two encodings are mirror images bit-for-bit.
_COS_PHASE = (math.sqrt(0.5), -math.sqrt(0.5))

NC_SEARCH_CEILING = 1e3
QBER_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ChannelParams:
    """Mean photon number per pulse and phase-diffusion width (radians)."""

    mean_photon_number: float
    phase_diffusion: float = 0.0

    def __post_init__(self):
        for name in ("mean_photon_number", "phase_diffusion"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")

    @property
    def nc(self) -> float:
        return self.mean_photon_number

    @property
    def delta(self) -> float:
        return self.phase_diffusion


class PhotonOutcome(NamedTuple):
    n0: int
    n1: int

    @property
    def total(self) -> int:
        return self.n0 + self.n1


@dataclass(frozen=True)
class DifferencePmf:
    """Truncated law of ``D = n1 - n0`` on the window ``[-d_max, d_max]``."""

    d_max: int
    mass: np.ndarray

    @property
    def d_min(self) -> int:
        return -self.d_max

    @property
    def support(self) -> np.ndarray:
        return np.arange(-self.d_max, self.d_max + 1)

    def __getitem__(self, d: int) -> float:
        if abs(d) > self.d_max:
            return 0.0
        return float(self.mass[d + self.d_max])

    def total(self) -> float:
        return float(math.fsum(self.mass))


def check_bit(bit) -> int:
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return int(bit)


def contrast(phase_diffusion: float) -> float:
    """Visibility factor ``exp(-delta**2)`` left by phase diffusion."""
    return math.exp(-phase_diffusion * phase_diffusion)


def arm_means(params: ChannelParams, bit: int) -> tuple[float, float]:
    """Mean photon numbers ``(N0, N1)`` of the reflected and transmitted arms."""
    bit = check_bit(bit)
    shift = contrast(params.delta) * _COS_PHASE[bit]
    half = 0.5 * params.nc
    return half * (1.0 + shift), half * (1.0 - shift)


def q_param(phase_diffusion: float) -> float:
    """Fraction of the carrier that lands in the "wrong" arm.

    Ranges from ``(2 - sqrt(2))/4`` without noise up to 1/2 as the
    diffusion washes out the polarization.
    """
    if phase_diffusion < 0 or math.isnan(phase_diffusion):
        raise ValueError(f"phase_diffusion must be >= 0, got {phase_diffusion!r}")
    return 0.5 * (1.0 - contrast(phase_diffusion) * _COS_PHASE[0])


def window(mean_photon_number: float) -> int:
    """Half-width ``d_max`` of the truncation window for D."""
    return math.ceil(mean_photon_number + 10.0 * math.sqrt(mean_photon_number + 1.0) + 20.0)


def log_bessel_i(order, x: float) -> np.ndarray:
    """``log I_order(x)`` for nonnegative integer orders, stable for large ``x``."""
    order = np.abs(np.asarray(order, dtype=float))
    if x == 0.0:
        return np.where(order == 0, 0.0, -np.inf)
    with np.errstate(divide="ignore"):
        return np.log(special.ive(order, x)) + x


def joint_pmf(params: ChannelParams, bit: int, outcome) -> float:
    """``p(n0, n1 | bit)``: product of two Poisson terms, evaluated in log space."""
    n0, n1 = outcome
    if n0 < 0 or n1 < 0:
        return 0.0
    return float(np.exp(joint_logpmf(params, bit, n0, n1)))


def joint_logpmf(params: ChannelParams, bit: int, n0, n1) -> np.ndarray:
    """Vectorized ``log p(n0, n1 | bit)``."""
    mean0, mean1 = arm_means(params, bit)
    n0 = np.asarray(n0, dtype=float)
    n1 = np.asarray(n1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (
            special.xlogy(n0, mean0)
            + special.xlogy(n1, mean1)
            - special.gammaln(n0 + 1.0)
            - special.gammaln(n1 + 1.0)
            - params.nc
        )


def skellam_logpmf(params: ChannelParams, bit: int, d) -> np.ndarray:
    """Vectorized ``log p_D(d | bit)`` via the modified Bessel function."""
    d = np.asarray(d)
    if params.nc == 0.0:
        return np.where(d == 0, 0.0, -np.inf)
    # N1/N0 = (q/(1-q))^(+1 or -1) regardless of N_c, so tiny N_c cannot underflow the ratio
    q = q_param(params.delta)
    ratio = (math.log(q) - math.log1p(-q)) * (1 if check_bit(bit) == 0 else -1)
    argument = 2.0 * params.nc * math.sqrt(q * (1.0 - q))
    return -params.nc + 0.5 * d * ratio + log_bessel_i(d, argument)


def skellam_pmf(params: ChannelParams, bit: int, d):
    """``p_D(d | bit)`` for the difference ``D = n1 - n0``.

    Accepts a scalar or an array of differences.
    """
    out = np.exp(skellam_logpmf(params, bit, d))
    return float(out) if out.ndim == 0 else out


def difference_pmf(params: ChannelParams, bit: int) -> DifferencePmf:
    d_max = window(params.nc)
    support = np.arange(-d_max, d_max + 1)
    return DifferencePmf(d_max=d_max, mass=np.exp(skellam_logpmf(params, bit, support)))


def qber(params: ChannelParams, via_bit: int = 0) -> float:
    """Raw error rate of the sign detector with a fair coin on ``D = 0``.

    ``via_bit`` picks which hypothesis the sum is taken under; the two give
    the same value by symmetry of the encoding.
    """
    pmf = difference_pmf(params, check_bit(via_bit))
    if via_bit == 0:
        wrong = pmf.mass[pmf.d_max + 1 :]
    else:
        wrong = pmf.mass[: pmf.d_max]
    return math.fsum(wrong) + 0.5 * pmf[0]


def nc_for_qber(target_qber: float, phase_diffusion: float) -> float:
    """Invert ``qber`` in ``N_c`` by bisection on ``[0, NC_SEARCH_CEILING]``."""
    if not math.isfinite(phase_diffusion) or phase_diffusion < 0:
        raise ValueError(f"phase_diffusion must be finite and >= 0, got {phase_diffusion!r}")
    if not 0.0 < target_qber < 0.5:
        raise TargetUnreachable(f"target QBER {target_qber!r} outside the open interval (0, 1/2)")
    floor = qber(ChannelParams(NC_SEARCH_CEILING, phase_diffusion))
    if target_qber <= floor:
        raise TargetUnreachable(
            f"target QBER {target_qber!r} at or below {floor:.3e}, the value reached at "
            f"N_c={NC_SEARCH_CEILING:g} for delta={phase_diffusion!r}"
        )

    def excess(nc: float) -> float:
        return qber(ChannelParams(nc, phase_diffusion)) - target_qber

    nc = optimize.bisect(excess, 0.0, NC_SEARCH_CEILING, xtol=1e-13, rtol=1e-15, maxiter=200)
    if abs(excess(nc)) > QBER_TOLERANCE:
        raise TargetUnreachable(f"bisection stalled at N_c={nc!r} for target {target_qber!r}")
    return nc


def sample_outcome(params: ChannelParams, bit: int, rng: np.random.Generator) -> PhotonOutcome:
    mean0, mean1 = arm_means(params, bit)
    return PhotonOutcome(int(rng.poisson(mean0)), int(rng.poisson(mean1)))


def sample_outcomes(params: ChannelParams, bits, rng: np.random.Generator):
    """Draw ``(n0, n1)`` arrays for a whole block of bits at once."""
    bits = np.asarray(bits)
    means = np.array([arm_means(params, 0), arm_means(params, 1)])
    chosen = means[bits]
    counts = rng.poisson(chosen)
    return counts[..., 0], counts[..., 1]
