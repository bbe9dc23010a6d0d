import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikepack.errors import ContainerError, DomainError, ShapeError
from spikepack.spike_tensor import (
    PackedSpikes,
    SpikeMatrix,
    dumps,
    evaluate,
    full_scale,
    loads,
    pack,
    read_stream,
    temporal_weights,
    unpack,
    write_stream,
)


def spike_arrays(max_n=6, max_t=64):
    return st.integers(1, max_t).flatmap(
        lambda T: st.lists(st.lists(st.integers(0, 1), min_size=T, max_size=T), min_size=1, max_size=max_n)
    )


class TestPacking:
    @given(spike_arrays())
    def test_word_is_binary_weighted_sum(self, rows):
        S = np.array(rows, dtype=np.uint8)
        T = S.shape[1]
        packed = pack(S)
        for row, word in zip(rows, packed.bits):
            expected = sum(bit << (T - 1 - t) for t, bit in enumerate(row))
            assert int(word) == expected

    @given(spike_arrays())
    def test_unpack_inverts_pack(self, rows):
        S = np.array(rows, dtype=np.uint8)
        np.testing.assert_array_equal(unpack(pack(S)).data, S)

    def test_first_step_is_most_significant(self):
        assert int(pack(np.array([[1, 0, 0, 0]])).bits[0]) == 8
        assert int(pack(np.array([[0, 0, 0, 1]])).bits[0]) == 1

    def test_all_ones_at_64_steps(self):
        packed = pack(np.ones((1, 64), dtype=np.uint8))
        assert int(packed.bits[0]) == 2**64 - 1
        assert packed.spike_count() == 64

    @pytest.mark.parametrize("tau", [1.5, 2.0, 3.0, 2.7])
    def test_evaluate_matches_weighted_sum(self, tau):
        rng = np.random.default_rng(3)
        S = (rng.random((50, 12)) < 0.4).astype(np.uint8)
        q = np.array([tau ** (11 - t) for t in range(12)])
        np.testing.assert_allclose(evaluate(pack(S, tau)), S @ q, rtol=1e-13)

    def test_leading_shape_preserved(self):
        S = np.zeros((2, 3, 4, 5), dtype=np.uint8)
        assert pack(S).shape == (2, 3, 4)
        assert unpack(pack(S)).data.shape == S.shape


class TestValidation:
    def test_bits_above_t_rejected(self):
        with pytest.raises(DomainError):
            PackedSpikes(np.array([16], dtype=np.uint64), T=4)

    @pytest.mark.parametrize("tau", [1.0, 0.5, float("nan"), float("inf")])
    def test_bad_tau(self, tau):
        with pytest.raises(DomainError):
            PackedSpikes(np.zeros(1, dtype=np.uint64), T=4, tau=tau)

    @pytest.mark.parametrize("T", [0, 65])
    def test_bad_steps(self, T):
        with pytest.raises(ShapeError):
            temporal_weights(T, 2.0)

    def test_non_binary_matrix(self):
        with pytest.raises(DomainError):
            SpikeMatrix(np.array([[0, 2]]))

    def test_negative_words(self):
        with pytest.raises(DomainError):
            PackedSpikes(np.array([-1]), T=4)


class TestCounts:
    def test_full_scale(self):
        for T in (1, 8, 16, 52):
            assert full_scale(T, 2.0) == 2**T - 1
        assert full_scale(3, 3.0) == pytest.approx(13.0)

    def test_firing_rate(self):
        S = np.array([[1, 1, 0, 0], [0, 0, 0, 1]], dtype=np.uint8)
        packed = pack(S)
        assert packed.spike_count() == 3
        assert packed.firing_rate() == 3 / 8
        assert packed.nbytes == 16
        assert SpikeMatrix(S).nbytes == 8


class TestSerialization:
    def test_header_layout(self):
        packed = PackedSpikes(np.array([5, 3], dtype=np.uint64), T=3, tau=2.0)
        buf = dumps(packed)
        assert buf[:13] == struct.pack("<IBd", 2, 3, 2.0)
        assert buf[13:] == struct.pack("<2Q", 5, 3)

    @given(spike_arrays(), st.sampled_from([1.5, 2.0, 3.0]))
    @settings(max_examples=50)
    def test_roundtrip(self, rows, tau):
        packed = pack(np.array(rows, dtype=np.uint8), tau)
        back, end = loads(dumps(packed))
        assert end == len(dumps(packed))
        np.testing.assert_array_equal(back.bits, packed.bits)
        assert (back.T, back.tau) == (packed.T, packed.tau)

    def test_stream(self):
        recs = [pack(np.eye(3, 5, k=k, dtype=np.uint8)) for k in range(3)]
        fh = io.BytesIO()
        write_stream(fh, recs)
        fh.seek(0)
        out = list(read_stream(fh))
        assert len(out) == 3
        for a, b in zip(recs, out):
            np.testing.assert_array_equal(a.bits, b.bits)

    def test_truncated(self):
        buf = dumps(pack(np.ones((4, 4), dtype=np.uint8)))
        with pytest.raises(ContainerError):
            loads(buf[:-1])
        with pytest.raises(ContainerError):
            loads(buf[:5])

    def test_corrupt_record(self):
        buf = struct.pack("<IBd", 1, 4, 2.0) + struct.pack("<Q", 255)
        with pytest.raises(ContainerError):
            loads(buf)
