import io

import numpy as np
import pytest

from photoncount.errors import ConstructionFailed, LengthMismatch
from photoncount.ldpc import (
    CODE_SPECS,
    LLR_CLAMP,
    CodeSpec,
    LdpcCode,
    _row_reduce,
    construct_code,
    decode,
    decode_batch,
    encode,
    has_four_cycle,
    read_alist,
    spec_for_rate,
    syndrome,
    write_alist,
)

from . import oracles


@pytest.fixture(scope="module")
def codes():
    return {rate: construct_code(spec, seed=7) for rate, spec in CODE_SPECS.items()}


@pytest.fixture(scope="module")
def half(codes):
    return codes[0.5]


def test_specs():
    assert CODE_SPECS[0.5].rate == 0.5
    assert CODE_SPECS[0.75].rate == 0.75
    assert round(CODE_SPECS[0.61].rate, 4) == 0.6176
    assert spec_for_rate(0.61) == CodeSpec(252, 156)
    with pytest.raises(KeyError):
        spec_for_rate(0.9)


class TestConstruction:
    @pytest.mark.parametrize("rate", sorted(CODE_SPECS))
    def test_structure(self, codes, rate):
        code = codes[rate]
        spec = CODE_SPECS[rate]
        assert code.length == spec.length and code.info_len == spec.info_len
        assert code.rate == spec.rate
        assert (code.column_weights() == 3).all()
        rw = code.row_weights()
        assert rw.max() - rw.min() <= 2
        assert not has_four_cycle(code)

    def test_four_cycle_scan_is_exhaustive(self):
        # columns 0 and 1 share rows 0 and 1
        H = np.array([[1, 1, 1, 0], [1, 1, 0, 1]], dtype=np.uint8)
        assert has_four_cycle(LdpcCode.from_parity_check(H))
        assert not has_four_cycle(LdpcCode.from_parity_check(np.array([[1, 0, 1, 0], [0, 1, 0, 1]])))

    def test_deterministic(self):
        a = construct_code(CODE_SPECS[0.61], seed=3)
        b = construct_code(CODE_SPECS[0.61], seed=3)
        c = construct_code(CODE_SPECS[0.61], seed=4)
        assert np.array_equal(a.dense(), b.dense())
        assert np.array_equal(a.parity_map, b.parity_map)
        assert not np.array_equal(a.dense(), c.dense())

    def test_toy_spec_fails_loudly(self):
        with pytest.raises(ConstructionFailed):
            construct_code(CodeSpec(2, 2), seed=0)

    def test_rank_deficient_matrix_rejected(self):
        H = np.array([[1, 1, 0, 1], [1, 1, 0, 1]], dtype=np.uint8)
        with pytest.raises(ConstructionFailed):
            LdpcCode.from_parity_check(H)

    def test_full_rank(self, half):
        _, pivots = _row_reduce(half.dense())
        assert len(pivots) == half.parity_len


class TestEncode:
    def test_zero(self, half):
        assert not encode(half, np.zeros(half.info_len)).any()

    @pytest.mark.parametrize("rate", sorted(CODE_SPECS))
    def test_syndrome_and_prefix(self, codes, rate):
        code = codes[rate]
        rng = np.random.default_rng(int(rate * 100))
        info = rng.integers(0, 2, (50, code.info_len))
        words = encode(code, info)
        H = code.dense()
        for u, c in zip(info, words):
            assert np.array_equal(c[: code.info_len], u)
            assert not oracles.gf2_syndrome(H, c).any()

    def test_linearity(self, half):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a, b = rng.integers(0, 2, (2, half.info_len))
            assert np.array_equal(encode(half, a) ^ encode(half, b), encode(half, a ^ b))

    def test_length_mismatch(self, half):
        with pytest.raises(LengthMismatch):
            encode(half, np.zeros(3))


class TestSyndrome:
    def test_codeword_and_single_flip(self, half):
        word = encode(half, np.random.default_rng(0).integers(0, 2, half.info_len))
        assert not syndrome(half, word).any()
        H = half.dense()
        for j in (0, 17, half.length - 1):
            flipped = word.copy()
            flipped[j] ^= 1
            assert np.array_equal(syndrome(half, flipped), H[:, j])

    def test_random_against_dense(self, half):
        rng = np.random.default_rng(5)
        H = half.dense()
        for _ in range(20):
            v = rng.integers(0, 2, half.length).astype(np.uint8)
            assert np.array_equal(syndrome(half, v), oracles.gf2_syndrome(H, v))

    def test_length_mismatch(self, half):
        with pytest.raises(LengthMismatch):
            syndrome(half, np.zeros(5))


def to_llr(bits, magnitude):
    return np.where(np.asarray(bits) == 1, magnitude, -magnitude)


class TestDecode:
    def test_noiseless(self, half):
        word = encode(half, np.random.default_rng(9).integers(0, 2, half.info_len))
        result = decode(half, to_llr(word, 20.0), max_iters=50)
        assert result.converged and result.iterations_used <= 1
        assert np.array_equal(result.decided_bits, word)

    def test_no_information(self, half):
        result = decode(half, np.zeros(half.length), max_iters=10)
        assert not result.converged
        assert result.iterations_used == 10

    def test_single_strong_flip(self, half):
        rng = np.random.default_rng(12)
        for _ in range(10):
            word = encode(half, rng.integers(0, 2, half.info_len))
            llr = to_llr(word, 8.0)
            j = rng.integers(half.length)
            llr[j] = -llr[j]
            result = decode(half, llr)
            assert result.converged
            assert np.array_equal(result.decided_bits, word)

    def test_converged_means_zero_syndrome(self, half):
        rng = np.random.default_rng(1)
        word = encode(half, rng.integers(0, 2, (40, half.info_len)))
        sigma = 0.88
        llr = 2 * (to_llr(word, 1.0) + rng.normal(0, sigma, word.shape)) / sigma**2
        decided, converged, iters = decode_batch(half, llr, 30)
        assert converged.any() and not converged.all()
        assert not syndrome(half, decided[converged]).any()
        assert (iters[~converged] == 30).all()

    def test_corrects_sparse_errors(self, half):
        # about 1% flips is far inside the rate-1/2 correction region
        rng = np.random.default_rng(6)
        words = encode(half, rng.integers(0, 2, (100, half.info_len)))
        received = words ^ (rng.random(words.shape) < 0.01)
        decided, converged, _ = decode_batch(half, to_llr(received, np.log(99)), 50)
        assert converged.all()
        assert np.array_equal(decided, words)

    def test_check_message_sign(self, half):
        # every neighbour confidently 1: the message says 1 when the others are odd in number
        g = half.graph
        c2v = g.check_update(np.full((1, g.n_edges), 10.0))
        deg = (g.slots < g.n_edges).sum(axis=1)
        row_of_edge = np.repeat(np.arange(len(deg)), deg)
        expected_sign = np.where(deg[row_of_edge] % 2 == 0, 1.0, -1.0)
        assert (np.sign(c2v[0]) == expected_sign).all()

    def test_tie_decodes_to_zero(self, half):
        decided, _, _ = decode_batch(half, np.zeros((1, half.length)), 0)
        assert not decided.any()

    @pytest.mark.parametrize("rate", sorted(CODE_SPECS))
    def test_round_trip_thousand_frames(self, codes, rate):
        code = codes[rate]
        rng = np.random.default_rng(100)
        info = rng.integers(0, 2, (1000, code.info_len))
        words = encode(code, info)
        decided, converged, _ = decode_batch(code, to_llr(words, 25.0), 50)
        assert converged.all()
        assert np.array_equal(decided, words)

    def test_messages_stay_finite(self, half):
        g = half.graph
        rng = np.random.default_rng(3)
        v2c = rng.normal(0, 200, (4, g.n_edges))
        v2c[:, ::7] = 0.0
        v2c[:, 1::11] = np.inf
        c2v = g.check_update(v2c)
        assert np.isfinite(c2v).all()
        assert np.abs(c2v).max() <= LLR_CLAMP + 1e-9

    def test_extreme_llrs(self, half):
        llr = np.random.default_rng(0).choice([-1e300, 1e300, 0.0], half.length)
        decided, _, _ = decode_batch(half, llr[None, :], 5)
        assert decided.shape == (1, half.length)

    def test_length_mismatch(self, half):
        with pytest.raises(LengthMismatch):
            decode(half, np.zeros(3))


class TestAlist:
    def test_round_trip(self, codes):
        code = codes[0.61]
        buf = io.StringIO()
        write_alist(code, buf)
        buf.seek(0)
        H = read_alist(buf)
        assert np.array_equal(H, code.dense())
        rebuilt = LdpcCode.from_parity_check(H)
        assert np.array_equal(rebuilt.column_order, np.arange(code.length))
        assert np.array_equal(rebuilt.parity_map, code.parity_map)

    def test_file_layout(self, codes, tmp_path):
        code = codes[0.75]
        path = tmp_path / "h.alist"
        write_alist(code, path)
        lines = path.read_text().splitlines()
        assert lines[0] == f"{code.length} {code.parity_len}"
        assert lines[1] == f"3 {code.row_weights().max()}"
        assert len(lines) == 4 + code.length + code.parity_len
        first_col = [int(v) for v in lines[4].split()]
        assert first_col == [int(r) + 1 for r in code.var_checks[0]]
        assert min(int(v) for ln in lines[4:] for v in ln.split()) >= 0
        assert np.array_equal(read_alist(path), code.dense())
