import csv
import io
import math

import pytest

from photoncount.errors import TargetUnreachable
from photoncount.ldpc import CODE_SPECS, CodeSpec
from photoncount.montecarlo import (
    CSV_FIELDS,
    ChannelModel,
    OperatingPoint,
    SimConfig,
    derive_seed,
    run_point,
    run_sweep,
    uncoded_check,
    write_records,
)

from . import oracles

SMALL = CodeSpec(252, 156)


def config(model, points, **kw):
    kw.setdefault("max_frames", 200)
    kw.setdefault("min_frame_errors", 20)
    return SimConfig(kw.pop("spec", SMALL), model, points, **kw)


def test_operating_point_validation():
    with pytest.raises(ValueError):
        OperatingPoint()
    with pytest.raises(ValueError):
        OperatingPoint(qber=0.1, nc=3)
    with pytest.raises(ValueError):
        OperatingPoint(qber=0.5)
    with pytest.raises(ValueError):
        OperatingPoint(nc=1, delta=-1)


def test_seed_mixing_is_fixed():
    assert derive_seed(0, 0) == derive_seed(0, 0)
    assert len({derive_seed(0, p, f) for p in range(20) for f in range(20)}) == 400
    assert 0 <= derive_seed(12345, 7) < 2**64


class TestRunPoint:
    @pytest.mark.parametrize("model", ["BIMO", "BSC"])
    def test_near_noiseless(self, model):
        cfg = config(model, [], spec=CODE_SPECS[0.5], max_frames=1000, min_frame_errors=1)
        record = run_point(cfg, OperatingPoint(qber=1e-3))
        assert record.frames_run == 1000
        assert record.fer == 0 and record.ber == 0

    def test_deterministic(self):
        cfg = config("BIMO", [])
        point = OperatingPoint(qber=0.12, delta=0.3)
        assert run_point(cfg, point, 3) == run_point(cfg, point, 3)
        assert run_point(cfg, point, 3).seed != run_point(cfg, point, 4).seed

    @pytest.mark.parametrize("model", list(ChannelModel))
    def test_record_invariants(self, model):
        record = run_point(config(model, [], min_frame_errors=15), OperatingPoint(qber=0.12))
        L = SMALL.info_len
        assert record.ber == record.info_bit_errors / (record.frames_run * L)
        assert record.fer == record.frame_errors / record.frames_run
        assert 0 <= record.ber <= record.fer <= 1
        assert record.frame_errors == 15 or record.frames_run == 200
        assert record.model == model.value and record.rate == SMALL.rate

    def test_nc_axis(self):
        record = run_point(config("BIMO", []), OperatingPoint(nc=2.0, delta=0.1))
        assert record.nc == 2.0
        assert 0.1 < record.qber_target < 0.5

    def test_unreachable_target(self):
        with pytest.raises(TargetUnreachable):
            run_point(config("BIMO", []), OperatingPoint(qber=1e-300, delta=3.0))

    def test_stops_at_frame_error_budget(self):
        record = run_point(config("BSC", [], max_frames=10_000, min_frame_errors=5), OperatingPoint(qber=0.2))
        assert record.frame_errors == 5
        assert record.frames_run < 20


class TestSweep:
    def test_empty(self):
        assert run_sweep(config("BSC", [])) == []

    def test_repeatable_and_worker_independent(self):
        points = [OperatingPoint(qber=q) for q in (0.1, 0.13)]
        a = run_sweep(config("AWGN", points, master_seed=9))
        b = run_sweep(config("AWGN", points, master_seed=9))
        c = run_sweep(config("AWGN", points, master_seed=9, workers=2))
        assert a == b == c
        assert [r.qber_target for r in a] == [0.1, 0.13]

    def test_failures_are_skipped(self):
        failures = []
        points = [OperatingPoint(qber=0.15), OperatingPoint(qber=1e-300, delta=3.0), OperatingPoint(qber=0.16)]
        records = run_sweep(config("BIMO", points, max_frames=30), failures)
        assert len(records) == 2
        assert failures[0][0] == 1 and isinstance(failures[0][1], TargetUnreachable)

    def test_fer_trend(self):
        grid = [0.02, 0.05, 0.08, 0.11]
        records = run_sweep(config("BSC", [OperatingPoint(qber=q) for q in grid], max_frames=300, min_frame_errors=40))
        fers = [r.fer for r in records]
        for lo, hi in zip(records, records[1:]):
            sigma = math.sqrt(lo.fer * (1 - lo.fer) / lo.frames_run + hi.fer * (1 - hi.fer) / hi.frames_run)
            assert hi.fer >= lo.fer - 3 * sigma, fers
        assert fers[-1] > fers[0]


class TestUncoded:
    @pytest.mark.parametrize("model", list(ChannelModel))
    def test_matches_target(self, model):
        trials = 10**6
        rate = uncoded_check(model, OperatingPoint(qber=0.1), trials, seed=17)
        assert abs(rate - 0.1) <= 4 * oracles.binomial_sigma(0.1, trials)

    def test_with_phase_diffusion(self):
        trials = 10**6
        rate = uncoded_check("BIMO", OperatingPoint(qber=0.07, delta=0.6), trials, seed=2)
        assert abs(rate - 0.07) <= 4 * oracles.binomial_sigma(0.07, trials)


def test_csv_schema():
    records = run_sweep(config("BSC", [OperatingPoint(qber=0.15)], max_frames=20))
    buf = io.StringIO()
    write_records(records, buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == CSV_FIELDS == ["model", "rate", "qber_target", "nc", "delta", "frames_run", "frame_errors", "info_bit_errors", "ber", "fer", "seed"]
    assert len(rows) == 2
    assert rows[1][0] == "BSC" and int(rows[1][5]) == records[0].frames_run
