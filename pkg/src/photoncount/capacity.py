"""Capacity of the photon-counting channel versus its hard-decision BSC.

The difference ``D = n1 - n0`` is a sufficient statistic, so the mutual
information is computed on the Skellam law of ``D``.  Sums run over the same
truncation window as :mod:`photoncount.channel`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import channel
from .channel import ChannelParams, log_bessel_i, window

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class CapacityPoint:
    params: ChannelParams
    bimo_capacity: float
    bsc_capacity: float
    qber: float


def check_prior(z0: float) -> float:
    if not 0.0 <= z0 <= 1.0:
        raise ValueError(f"prior probability z0 must lie in [0, 1], got {z0!r}")
    return float(z0)


def binary_entropy(p: float) -> float:
    """``h2(p)`` in bits with ``0 log 0 = 0``."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


def log_alpha(phase_diffusion: float) -> float:
    """``ln((sqrt 2 + e^-delta^2) / (sqrt 2 - e^-delta^2))``, i.e. ``ln((1 - q)/q)``."""
    c = math.exp(-phase_diffusion * phase_diffusion)
    root2 = math.sqrt(2.0)
    return math.log(root2 + c) - math.log(root2 - c)


def alpha(phase_diffusion: float) -> float:
    return math.exp(log_alpha(phase_diffusion))


def log_bessel_terms(params: ChannelParams, m) -> np.ndarray:
    """``ln I_|m|(N_c sqrt(1 - e^{-2 delta^2}/2))``."""
    arg = params.nc * math.sqrt(1.0 - 0.5 * math.exp(-2.0 * params.delta**2))
    return log_bessel_i(m, arg)


def _log_posteriors(z0: float, phase_diffusion: float, m):
    m = np.asarray(m, dtype=float)
    with np.errstate(divide="ignore"):
        lz0, lz1 = np.log(z0), np.log1p(-z0)
    tilt = lz1 + m * log_alpha(phase_diffusion)
    norm = np.logaddexp(lz0, tilt)
    return lz0 - norm, tilt - norm


def posterior(z0: float, phase_diffusion: float, m: int) -> tuple[float, float]:
    """``(P(bit 0 | D=m), P(bit 1 | D=m))`` under prior ``P(bit 0) = z0``."""
    z0 = check_prior(z0)
    l0, l1 = _log_posteriors(z0, phase_diffusion, m)
    return float(np.exp(l0)), float(np.exp(l1))


def _plogp(logw: np.ndarray, logp: np.ndarray) -> np.ndarray:
    """``w * log2 p`` from log weights, with zero-weight terms contributing 0."""
    out = np.zeros_like(logw)
    live = np.isfinite(logw)
    out[live] = np.exp(logw[live]) * logp[live] / LOG2
    return out


def conditional_entropy(params: ChannelParams, z0: float) -> float:
    """Equivocation ``H(bit | D)`` in bits, from the Bessel-series closed form."""
    z0 = check_prior(z0)
    d_max = window(params.nc)
    m = np.arange(-d_max, d_max + 1)
    la = log_alpha(params.delta)
    log_b = log_bessel_terms(params, m) - params.nc
    with np.errstate(divide="ignore"):
        w0 = np.log(z0) + log_b - 0.5 * m * la
        w1 = np.log1p(-z0) + log_b + 0.5 * m * la
    p0, p1 = _log_posteriors(z0, params.delta, m)
    total = -(math.fsum(_plogp(w0, p0)) + math.fsum(_plogp(w1, p1)))
    return min(max(total, 0.0), 1.0)


def mutual_information(params: ChannelParams, z0: float) -> float:
    z0 = check_prior(z0)
    return max(binary_entropy(z0) - conditional_entropy(params, z0), 0.0)


def bimo_capacity(params: ChannelParams) -> float:
    """Capacity in bits/use; the uniform prior is the maximizer for this channel."""
    return mutual_information(params, 0.5)


def bsc_capacity(qber: float) -> float:
    if not 0.0 <= qber <= 0.5:
        raise ValueError(f"crossover probability must lie in [0, 1/2], got {qber!r}")
    return 1.0 - binary_entropy(qber)


def capacity_point(params: ChannelParams) -> CapacityPoint:
    error_rate = channel.qber(params)
    return CapacityPoint(params, bimo_capacity(params), bsc_capacity(error_rate), error_rate)


def capacity_sweep(grid, workers: int = 1) -> list[CapacityPoint]:
    """One :class:`CapacityPoint` per grid entry, in grid order."""
    grid = list(grid)

    def evaluate(indexed):
        index, params = indexed
        try:
            return capacity_point(params)
        except Exception as exc:
            raise type(exc)(f"grid point {index} ({params}): {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(evaluate, enumerate(grid)))
    return [evaluate(item) for item in enumerate(grid)]
