"""Coded BER/FER simulation over the photon-counting, BSC and AWGN channels.

Each frame draws from its own generator seeded by ``(master_seed, point
index, frame index)``, so the counts do not depend on how frames are batched
or spread across worker processes.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import channel, metrics
from .channel import ChannelParams
from .errors import PhotonCountError
from .ldpc import DEFAULT_MAX_ITERS, CodeSpec, LdpcCode, construct_code, decode_batch, encode

log = logging.getLogger(__name__)

DEFAULT_MAX_FRAMES = 100_000
DEFAULT_MIN_FRAME_ERRORS = 100
DEFAULT_CODE_SEED = 1
# Blocks grow geometrically so high-error points stop early without wasted decodes.
FIRST_BLOCK = 16
MAX_BLOCK = 512


class ChannelModel(str, enum.Enum):
    BIMO = "BIMO"
    BSC = "BSC"
    AWGN = "AWGN"


@dataclass(frozen=True)
class OperatingPoint:
    """A target QBER, or a mean photon number; ``delta`` applies to both."""

    qber: float | None = None
    nc: float | None = None
    delta: float = 0.0

    def __post_init__(self):
        if (self.qber is None) == (self.nc is None):
            raise ValueError("give exactly one of qber or nc")
        if self.qber is not None and not 0.0 < self.qber < 0.5:
            raise ValueError(f"target QBER must lie in (0, 1/2), got {self.qber!r}")
        if self.nc is not None and not (math.isfinite(self.nc) and self.nc > 0):
            raise ValueError(f"nc must be finite and > 0, got {self.nc!r}")
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise ValueError(f"delta must be finite and >= 0, got {self.delta!r}")


@dataclass
class SimConfig:
    code_spec: CodeSpec
    model: ChannelModel
    operating_points: list
    max_frames: int = DEFAULT_MAX_FRAMES
    min_frame_errors: int = DEFAULT_MIN_FRAME_ERRORS
    max_iters: int = DEFAULT_MAX_ITERS
    master_seed: int = 0
    code_seed: int = DEFAULT_CODE_SEED
    workers: int = 1

    def __post_init__(self):
        self.model = ChannelModel(self.model)
        if self.max_frames < 1 or self.min_frame_errors < 1 or self.max_iters < 1:
            raise ValueError("max_frames, min_frame_errors and max_iters must all be >= 1")


@dataclass(frozen=True)
class SimRecord:
    model: str
    rate: float
    qber_target: float
    nc: float
    delta: float
    frames_run: int
    frame_errors: int
    info_bit_errors: int
    ber: float
    fer: float
    seed: int


CSV_FIELDS = [f.name for f in fields(SimRecord)]


def derive_seed(*keys: int) -> int:
    """Fixed 64-bit mix of integer keys (SeedSequence hashing)."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class _Link:
    """Everything a worker needs to push codewords through one operating point."""

    model: ChannelModel
    qber: float
    params: ChannelParams

    @classmethod
    def resolve(cls, model: ChannelModel, point: OperatingPoint) -> "_Link":
        if point.qber is not None:
            target = point.qber
            nc = channel.nc_for_qber(target, point.delta) if model is ChannelModel.BIMO else math.nan
        else:
            nc = point.nc
            target = channel.qber(ChannelParams(nc, point.delta))
        params = ChannelParams(0.0 if math.isnan(nc) else nc, point.delta)
        link = cls(model, target, params)
        link.check()
        return link

    def check(self):
        if self.model is ChannelModel.BIMO:
            metrics.llr_slope(self.params.delta)
        elif self.model is ChannelModel.BSC:
            metrics.bsc_llr_magnitude(self.qber)
        else:
            metrics.snr_from_qber(self.qber)

    def llrs(self, bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.model is ChannelModel.BIMO:
            n0, n1 = channel.sample_outcomes(self.params, bits, rng)
            return metrics.bimo_llrs(self.params, n0, n1)
        if self.model is ChannelModel.BSC:
            received = bits ^ (rng.random(bits.shape) < self.qber)
            return np.where(received == 1, 1.0, -1.0) * metrics.bsc_llr_magnitude(self.qber)
        return metrics.awgn_sample_llrs(metrics.snr_from_qber(self.qber), bits, rng)

    def hard_bits(self, bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.model is ChannelModel.BIMO:
            n0, n1 = channel.sample_outcomes(self.params, bits, rng)
            return metrics.hard_decisions(n0, n1, rng)
        llr = self.llrs(bits, rng)
        coins = rng.integers(0, 2, size=bits.shape)
        return np.where(llr > 0, 1, np.where(llr < 0, 0, coins)).astype(np.uint8)


def simulate_frames(code: LdpcCode, link: _Link, keys: tuple, frames: range, max_iters: int):
    """Run a contiguous block of frames; returns per-frame information-bit error counts."""
    info = np.empty((len(frames), code.info_len), dtype=np.uint8)
    llrs = np.empty((len(frames), code.length))
    rngs = []
    for row, frame in enumerate(frames):
        rng = np.random.default_rng(derive_seed(*keys, frame))
        info[row] = rng.integers(0, 2, code.info_len, dtype=np.uint8)
        rngs.append(rng)
    codewords = encode(code, info)
    for row, rng in enumerate(rngs):
        llrs[row] = link.llrs(codewords[row], rng)
    decided, _, _ = decode_batch(code, llrs, max_iters)
    return (decided[:, : code.info_len] != info).sum(axis=1)


_worker_code: LdpcCode | None = None


def _init_worker(code: LdpcCode) -> None:
    global _worker_code
    _worker_code = code


def _worker_block(link, keys, start, stop, max_iters):
    return simulate_frames(_worker_code, link, keys, range(start, stop), max_iters)


def _blocks(max_frames: int):
    start, size = 0, FIRST_BLOCK
    while start < max_frames:
        stop = min(start + size, max_frames)
        yield start, stop
        start, size = stop, min(2 * size, MAX_BLOCK)


def _collect(counts, frame_errors, max_frames, min_frame_errors, per_frame):
    """Append per-frame counts until the stopping rule fires; True when it does."""
    for errs in per_frame:
        counts.append(int(errs))
        if errs:
            frame_errors[0] += 1
        if frame_errors[0] >= min_frame_errors or len(counts) >= max_frames:
            return True
    return False


def run_point(config: SimConfig, point: OperatingPoint, point_index: int = 0, code: LdpcCode | None = None, pool=None) -> SimRecord:
    """Simulate one operating point until ``min_frame_errors`` or ``max_frames``."""
    model = ChannelModel(config.model)
    link = _Link.resolve(model, point)
    if code is None:
        code = construct_code(config.code_spec, config.code_seed)
    keys = (config.master_seed, point_index)
    counts: list[int] = []
    frame_errors = [0]
    blocks = _blocks(config.max_frames)
    if pool is None:
        for start, stop in blocks:
            block = simulate_frames(code, link, keys, range(start, stop), config.max_iters)
            if _collect(counts, frame_errors, config.max_frames, config.min_frame_errors, block):
                break
    else:
        done = False
        while not done:
            wave = [pool.submit(_worker_block, link, keys, a, b, config.max_iters) for a, b in _take(blocks, config.workers)]
            if not wave:
                break
            for future in wave:
                if done:
                    future.cancel()
                    continue
                done = _collect(counts, frame_errors, config.max_frames, config.min_frame_errors, future.result())

    frames_run = len(counts)
    bit_errors = sum(counts)
    return SimRecord(
        model=model.value,
        rate=code.rate,
        qber_target=link.qber,
        nc=link.params.nc if model is ChannelModel.BIMO or point.nc is not None else math.nan,
        delta=point.delta,
        frames_run=frames_run,
        frame_errors=frame_errors[0],
        info_bit_errors=bit_errors,
        ber=bit_errors / (frames_run * code.info_len),
        fer=frame_errors[0] / frames_run,
        seed=derive_seed(*keys),
    )


def _take(iterator, k):
    out = []
    for item in iterator:
        out.append(item)
        if len(out) == k:
            break
    return out


def run_sweep(config: SimConfig, failures: list | None = None) -> list[SimRecord]:
    """Run every operating point in order.

    A failing point is logged and skipped; pass ``failures`` to collect
    ``(index, exception)`` pairs.
    """
    if not config.operating_points:
        return []
    code = construct_code(config.code_spec, config.code_seed)
    pool = ProcessPoolExecutor(config.workers, initializer=_init_worker, initargs=(code,)) if config.workers > 1 else None
    records = []
    try:
        for index, point in enumerate(config.operating_points):
            try:
                records.append(run_point(config, point, index, code=code, pool=pool))
            except PhotonCountError as exc:
                log.warning("operating point %d (%s) failed: %s", index, point, exc)
                if failures is not None:
                    failures.append((index, exc))
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return records


def uncoded_check(model: ChannelModel, point: OperatingPoint, trials: int, seed: int = 0, chunk: int = 100_000) -> float:
    """Empirical hard-decision error rate of the bare channel (no coding)."""
    link = _Link.resolve(ChannelModel(model), point)
    rng = np.random.default_rng(seed)
    errors = 0
    remaining = trials
    while remaining:
        size = min(chunk, remaining)
        bits = rng.integers(0, 2, size, dtype=np.uint8)
        errors += int(np.count_nonzero(link.hard_bits(bits, rng) != bits))
        remaining -= size
    return errors / trials


def write_records(records, stream) -> None:
    """CSV with a header row and one record per line, in field order."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for record in records:
        writer.writerow([_cell(v) for v in asdict(record).values()])


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return value
