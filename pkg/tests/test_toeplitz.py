"""Toeplitz extractor: matrix semantics, seed derivation, block extraction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringrng import entropy
from ringrng.errors import SequenceTooShortError, ValidationError
from ringrng.timetag import BitBuffer
from ringrng.toeplitz import (
    ExtractorConfig,
    expand_seed,
    extract,
    toeplitz_apply,
    toeplitz_matrix,
)


def oracle_apply(seed_bits, x_bits, output_bits):
    """Dense GF(2) matrix-vector product, the independent reference."""
    T = toeplitz_matrix(np.asarray(seed_bits, dtype=np.uint8), output_bits)
    return (T.astype(np.int64) @ np.asarray(x_bits, dtype=np.int64)) % 2


class TestMatrix:
    def test_worked_example(self):
        # n=3, m=2: T = [[s2 s1 s0], [s3 s2 s1]] = [[1 0 1], [1 1 0]]
        T = toeplitz_matrix(np.array([1, 0, 1, 1], dtype=np.uint8), 2)
        assert T.tolist() == [[1, 0, 1], [1, 1, 0]]
        out = toeplitz_apply(np.array([1, 0, 1, 1], dtype=np.uint8),
                             np.array([1, 1, 0], dtype=np.uint8), 2)
        assert out.tolist() == [1, 0]

    def test_constant_diagonals(self):
        seed = expand_seed(3, 0, 20 + 8 - 1)
        T = toeplitz_matrix(seed, 8)
        for i in range(1, 8):
            assert np.array_equal(T[i, 1:], T[i - 1, :-1])

    def test_seed_too_short_rejected(self):
        with pytest.raises(ValidationError):
            toeplitz_matrix(np.zeros(4, dtype=np.uint8), 5)


class TestApply:
    def test_zero_seed_gives_zero_output(self):
        x = np.ones(50, dtype=np.uint8)
        out = toeplitz_apply(np.zeros(50 + 20 - 1, dtype=np.uint8), x, 20)
        assert not out.any()

    def test_delta_seed_selects_input_prefix(self):
        # s[n-1] = 1 makes T the m x n identity slice, so out = x[:m]
        n, m = 40, 16
        seed = np.zeros(n + m - 1, dtype=np.uint8)
        seed[n - 1] = 1
        x = expand_seed(9, 0, n)
        out = toeplitz_apply(seed, x, m)
        assert np.array_equal(out, x[:m])

    @pytest.mark.parametrize("method", ["packed", "fft"])
    def test_matches_dense_oracle(self, method, rng):
        for _ in range(200):
            n = int(rng.integers(1, 65))
            m = int(rng.integers(1, 33))
            seed = rng.integers(0, 2, n + m - 1).astype(np.uint8)
            x = rng.integers(0, 2, n).astype(np.uint8)
            got = toeplitz_apply(seed, x, m, method=method)
            assert np.array_equal(got, oracle_apply(seed, x, m))

    @pytest.mark.parametrize("n", [100, 32767, 32768, 40000])
    def test_fft_and_packed_agree(self, n, rng):
        # shapes on both sides of the auto cutover
        m = n // 2
        seed = rng.integers(0, 2, n + m - 1).astype(np.uint8)
        x = rng.integers(0, 2, n).astype(np.uint8)
        fft = toeplitz_apply(seed, x, m, method="fft")
        packed = toeplitz_apply(seed, x, m, method="packed")
        auto = toeplitz_apply(seed, x, m, method="auto")
        assert np.array_equal(fft, packed)
        assert np.array_equal(fft, auto)

    @given(data=st.data())
    @settings(max_examples=100, deadline=None)
    def test_oracle_equivalence_property(self, data):
        n = data.draw(st.integers(1, 48), label="n")
        m = data.draw(st.integers(1, 24), label="m")
        seed = np.array(
            data.draw(st.lists(st.integers(0, 1), min_size=n + m - 1,
                               max_size=n + m - 1)), dtype=np.uint8)
        x = np.array(
            data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)),
            dtype=np.uint8)
        for method in ("packed", "fft"):
            assert np.array_equal(toeplitz_apply(seed, x, m, method=method),
                                  oracle_apply(seed, x, m))

    def test_bad_arguments_rejected(self):
        seed = np.zeros(10, dtype=np.uint8)
        x = np.zeros(8, dtype=np.uint8)
        with pytest.raises(ValidationError):
            toeplitz_apply(seed, x, 0)
        with pytest.raises(ValidationError):
            toeplitz_apply(seed, x, 4)  # needs 8 + 4 - 1 = 11 seed bits
        with pytest.raises(ValidationError):
            toeplitz_apply(seed, x, 3, method="magic")


class TestSeedExpansion:
    def test_deterministic(self):
        a = expand_seed(42, 7, 1000)
        b = expand_seed(42, 7, 1000)
        assert np.array_equal(a, b)

    def test_prefix_consistent(self):
        # requesting fewer bits yields a prefix of the longer expansion
        long = expand_seed(5, 1, 999)
        short = expand_seed(5, 1, 100)
        assert np.array_equal(short, long[:100])

    @pytest.mark.parametrize("key,block,expected", [
        (0, 0, "0100000010100011000110110100011101111010101111000001000100111011"),
        (0, 1, "1101101101010111101011101001110101111111111010101010000100111100"),
        (12345, 0, "1101010110101010011010101001111101100101010110111001001000010100"),
    ])
    def test_frozen_vectors(self, key, block, expected):
        got = "".join(map(str, expand_seed(key, block, 64).tolist()))
        assert got == expected

    def test_block_index_avalanche(self):
        a = expand_seed(7, 3, 10_000)
        b = expand_seed(7, 4, 10_000)
        assert (a ^ b).mean() > 0.40

    def test_key_avalanche(self):
        a = expand_seed(7, 3, 10_000)
        b = expand_seed(8, 3, 10_000)
        assert (a ^ b).mean() > 0.40

    def test_bad_arguments_rejected(self):
        with pytest.raises(ValidationError):
            expand_seed(0, 0, 0)
        with pytest.raises(ValidationError):
            expand_seed(0, 2**64, 8)


class TestConfig:
    def test_geometry(self):
        cfg = ExtractorConfig(block_bits=1000, output_ratio=0.95, seed_key=3)
        assert cfg.output_bits == 950
        assert cfg.seed_bits == 1000 + 950 - 1

    @pytest.mark.parametrize("kwargs", [
        {"block_bits": 1},
        {"output_ratio": 0.0},
        {"output_ratio": 1.0},
        {"seed_key": -1},
        {"seed_key": 2**64},
        {"block_bits": 2, "output_ratio": 0.4},  # floor(0.8) = 0 output bits
    ])
    def test_bad_config_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            ExtractorConfig(**kwargs)


class TestExtract:
    CFG = ExtractorConfig(block_bits=512, output_ratio=0.75, seed_key=11)

    def bits(self, rng, n):
        return BitBuffer.from_array(rng.integers(0, 2, n).astype(np.uint8))

    def test_block_accounting(self, rng):
        res = extract(self.bits(rng, 2 * 512), self.CFG)
        assert res.n_blocks == 2
        assert res.output_block_bits == 384
        assert res.bits.bit_len == 2 * 384
        assert res.dropped_bits == 0
        assert res.input_bits_used == 1024

    def test_trailing_partial_block_dropped(self, rng):
        res = extract(self.bits(rng, 2 * 512 + 17), self.CFG)
        assert res.n_blocks == 2
        assert res.dropped_bits == 17
        assert res.input_bits_used == 1024

    def test_too_short_input_rejected(self, rng):
        with pytest.raises(SequenceTooShortError):
            extract(self.bits(rng, 511), self.CFG)

    def test_linearity(self, rng):
        # T(x ^ y) = T(x) ^ T(y): the map is GF(2)-linear per block
        for _ in range(10):
            x = self.bits(rng, 3 * 512)
            y = self.bits(rng, 3 * 512)
            lhs = extract(x.xor(y), self.CFG).bits
            rhs = extract(x, self.CFG).bits.xor(extract(y, self.CFG).bits)
            assert lhs == rhs

    def test_matches_manual_per_block_path(self, rng):
        buf = self.bits(rng, 4 * 512 + 3)
        res = extract(buf, self.CFG)
        x_all = buf.to_array()
        parts = {}
        for b in reversed(range(4)):  # order of computation must not matter
            seed = expand_seed(self.CFG.seed_key, b, self.CFG.seed_bits)
            parts[b] = toeplitz_apply(seed, x_all[b * 512:(b + 1) * 512], 384)
        manual = np.concatenate([parts[b] for b in range(4)])
        assert np.array_equal(res.bits.to_array(), manual)

    def test_per_block_seeds_differ(self, rng):
        # identical input blocks must not produce identical output blocks
        block = rng.integers(0, 2, 512).astype(np.uint8)
        res = extract(BitBuffer.from_array(np.tile(block, 2)), self.CFG)
        out = res.bits.to_array()
        assert not np.array_equal(out[:384], out[384:])

    def test_worker_count_does_not_change_output(self, rng):
        buf = self.bits(rng, 2 * 512)
        lone = extract(buf, self.CFG, method="fft", workers=None)
        pooled = extract(buf, self.CFG, method="fft", workers=2)
        assert lone.bits == pooled.bits

    def test_output_near_uniform_from_biased_input(self, rng):
        # input bias 0.55 has ~0.86 min-entropy/bit; compressing to 0.80
        # must leave output the 8-bit plug-in estimator cannot tell from
        # fresh uniform bits of the same length
        raw = (rng.random(4_194_304) < 0.55).astype(np.uint8)
        cfg = ExtractorConfig(block_bits=65_536, output_ratio=0.8, seed_key=7)
        out = extract(BitBuffer.from_array(raw), cfg).bits
        ref = BitBuffer.from_array(rng.integers(0, 2, out.bit_len).astype(np.uint8))
        h_raw = entropy.min_entropy_8bit(BitBuffer.from_array(raw)).min_entropy_per_bit
        h_out = entropy.min_entropy_8bit(out).min_entropy_per_bit
        h_ref = entropy.min_entropy_8bit(ref).min_entropy_per_bit
        assert h_out > h_raw + 0.05
        assert h_out >= h_ref - 0.01
