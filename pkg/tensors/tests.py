import itertools

import numpy as np
import pytest

from tensors.algebra import (
    contracted_product, fold, frobenius_norm, inner_product, matricize, n_mode_product,
    tucker_reconstruct, vectorize,
)
from tensors.codec import decode_dtf1, encode_dtf1, from_base64, read_dtf1, to_base64, write_dtf1
from tensors.dense import DenseTensor, ModePartition
from tensors.exceptions import (
    DimensionMismatchError, InvalidDataError, InvalidPartitionError, TensorFormatError,
)


def _random_partition(rng, order):
    modes = list(rng.permutation(order))
    cut = int(rng.integers(0, order + 1))
    return ModePartition(tuple(modes[:cut]), tuple(modes[cut:]))


class TestDenseTensor:
    def test_storage_order_is_first_index_fastest(self):
        t = DenseTensor.from_linear(np.arange(1, 9), [2, 2, 2])
        assert t[1, 0, 0] == 2
        assert t[0, 1, 0] == 3
        assert t[0, 0, 1] == 5
        assert t.linear_index((1, 1, 1)) == 7
        assert t.multi_index(5) == (1, 0, 1)

    def test_is_read_only(self):
        t = DenseTensor(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            t.data[0, 0] = 1.0

    def test_rejects_empty_modes(self):
        with pytest.raises(InvalidDataError):
            DenseTensor(np.zeros((2, 0)))

    def test_from_linear_checks_size(self):
        with pytest.raises(DimensionMismatchError):
            DenseTensor.from_linear([1, 2, 3], [2, 2])


class TestMatricize:
    def test_mode_one_unfolding_columns_are_fibers(self, rng):
        t = DenseTensor(rng.standard_normal((2, 3, 2)))
        m = matricize(t, ModePartition((0,), (1, 2)))
        assert m.shape == (2, 6)
        for j, k in itertools.product(range(3), range(2)):
            np.testing.assert_array_equal(m[:, j + 3 * k], t.data[:, j, k])

    def test_matrix_identity(self, rng):
        t = DenseTensor(rng.standard_normal((2, 3)))
        np.testing.assert_array_equal(matricize(t, ModePartition((0,), (1,))), t.data)

    def test_against_brute_force_enumeration(self):
        t = DenseTensor.from_linear(np.arange(1, 9), [2, 2, 2])
        partition = ModePartition((1,), (0, 2))
        expected = np.zeros((2, 4))
        for i, j, k in itertools.product(range(2), range(2), range(2)):
            expected[j, i + 2 * k] = t[i, j, k]
        np.testing.assert_array_equal(matricize(t, partition), expected)

    def test_overlapping_partition(self):
        t = DenseTensor(np.zeros((2, 2, 2)))
        with pytest.raises(InvalidPartitionError):
            matricize(t, ModePartition((0, 1), (1, 2)))

    def test_incomplete_partition(self):
        t = DenseTensor(np.zeros((2, 2, 2)))
        with pytest.raises(InvalidPartitionError):
            matricize(t, ModePartition((0,), (2,)))


class TestVectorize:
    def test_single_entry(self):
        np.testing.assert_array_equal(vectorize(DenseTensor([7.0])), [7.0])

    def test_identity_matrix(self):
        np.testing.assert_array_equal(vectorize(DenseTensor(np.eye(2))), [1, 0, 0, 1])

    def test_matches_full_row_matricization(self, rng):
        t = DenseTensor(rng.standard_normal((3, 2, 2)))
        full = matricize(t, ModePartition.vectorization(3))
        np.testing.assert_array_equal(vectorize(t), full[:, 0])


class TestFold:
    def test_inverts_mode_one_unfolding(self, rng):
        t = DenseTensor(rng.standard_normal((2, 3, 2)))
        partition = ModePartition((0,), (1, 2))
        assert fold(matricize(t, partition), partition, t.shape).allclose(t, rtol=0)

    def test_scalar(self):
        t = fold(np.array([[4.0]]), ModePartition((0,), (1,)), [1, 1])
        assert t.shape == (1, 1)
        assert t[0, 0] == 4.0

    def test_round_trip_on_random_tensors(self, rng):
        for _ in range(200):
            order = int(rng.integers(2, 5))
            shape = tuple(int(s) for s in rng.integers(1, 7, size=order))
            t = DenseTensor(rng.standard_normal(shape))
            partition = _random_partition(rng, order)
            back = fold(matricize(t, partition), partition, shape)
            np.testing.assert_array_equal(back.data, t.data)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            fold(np.zeros((2, 5)), ModePartition((0,), (1, 2)), [2, 3, 2])


class TestNModeProduct:
    def test_identity_leaves_tensor_unchanged(self, rng):
        t = DenseTensor(rng.standard_normal((3, 4, 2)))
        assert n_mode_product(t, np.eye(4), 1).allclose(t, rtol=0)

    def test_row_of_ones_sums_columns(self):
        t = DenseTensor(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
        result = n_mode_product(t, np.ones((1, 2)), 0)
        assert result.shape == (1, 3)
        np.testing.assert_array_equal(result.data, [[5.0, 7.0, 9.0]])

    def test_matches_matricized_identity(self, rng):
        t = DenseTensor(rng.standard_normal((3, 4, 2)))
        v = rng.standard_normal((5, 4))
        partition = ModePartition.mode_n(1, 3)
        expected = fold(v @ matricize(t, partition), partition, (3, 5, 2))
        assert n_mode_product(t, v, 1).allclose(expected, rtol=1e-12, atol=1e-12)

    def test_distinct_modes_commute(self, rng):
        t = DenseTensor(rng.standard_normal((3, 4, 2)))
        a, b = rng.standard_normal((2, 3)), rng.standard_normal((5, 2))
        left = n_mode_product(n_mode_product(t, a, 0), b, 2)
        right = n_mode_product(n_mode_product(t, b, 2), a, 0)
        assert left.allclose(right, rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            n_mode_product(DenseTensor(np.zeros((2, 3))), np.zeros((2, 2)), 1)


class TestContractedProduct:
    def test_full_self_contraction_is_squared_norm(self, rng):
        t = DenseTensor(rng.standard_normal((2, 3, 4)))
        result = contracted_product(t, t, [0, 1, 2], [0, 1, 2])
        assert result.shape == (1,)
        assert result[0] == pytest.approx(frobenius_norm(t) ** 2, rel=1e-12)
        assert inner_product(t, t) == pytest.approx(result[0], rel=1e-12)

    def test_matrix_case_is_matrix_product(self, rng):
        a, b = rng.standard_normal((2, 3)), rng.standard_normal((3, 4))
        np.testing.assert_allclose(contracted_product(a, b, [1], [0]).data, a @ b, rtol=1e-12)

    def test_against_summation_oracle(self, rng):
        a, b = rng.standard_normal((2, 3, 4)), rng.standard_normal((3, 5))
        expected = np.zeros((2, 4, 5))
        for i, j, k, m in itertools.product(range(2), range(3), range(4), range(5)):
            expected[i, k, m] += a[i, j, k] * b[j, m]
        np.testing.assert_allclose(contracted_product(a, b, [1], [0]).data, expected, rtol=1e-12)

    def test_random_pairs_against_einsum(self, rng):
        for _ in range(200):
            a = rng.standard_normal(tuple(rng.integers(1, 7, size=3)))
            b = rng.standard_normal((a.shape[2], int(rng.integers(1, 7)), a.shape[0]))
            result = contracted_product(a, b, [0, 2], [2, 0]).data
            np.testing.assert_allclose(result, np.einsum('ijk,kmi->jm', a, b), rtol=1e-12, atol=1e-12)

    def test_size_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            contracted_product(np.zeros((2, 3)), np.zeros((4, 2)), [1], [0])


class TestFrobeniusNorm:
    def test_zero(self):
        assert frobenius_norm(DenseTensor(np.zeros((3, 3)))) == 0.0

    def test_three_four_five(self):
        assert frobenius_norm(DenseTensor(np.array([[3.0, 0.0], [0.0, 4.0]]))) == pytest.approx(5.0)

    def test_equals_every_unfolding_norm(self, rng):
        for _ in range(200):
            order = int(rng.integers(2, 5))
            t = DenseTensor(rng.standard_normal(tuple(rng.integers(1, 7, size=order))))
            norm = frobenius_norm(t)
            for n in range(order):
                unfolded = np.linalg.norm(matricize(t, ModePartition.mode_n(n, order)))
                assert abs(norm - unfolded) <= 1e-12 * norm


class TestTuckerReconstruct:
    def test_identity_factors(self, rng):
        g = DenseTensor(rng.standard_normal((2, 3, 2)))
        assert tucker_reconstruct(g, [np.eye(2), np.eye(3), np.eye(2)]).allclose(g, rtol=0)

    def test_rank_one_outer_product(self, rng):
        u, v = rng.standard_normal((4, 1)), rng.standard_normal((3, 1))
        result = tucker_reconstruct(DenseTensor(np.ones((1, 1))), [u, v])
        np.testing.assert_allclose(result.data, u @ v.T, rtol=1e-12)

    def test_vector_factors_are_columns(self, rng):
        u, v = rng.standard_normal(4), rng.standard_normal(3)
        result = tucker_reconstruct(DenseTensor(np.full((1, 1), 2.0)), [u, v])
        np.testing.assert_allclose(result.data, 2.0 * np.outer(u, v), rtol=1e-12)

    def test_matrix_case(self, rng):
        g = rng.standard_normal((2, 3))
        u, v = rng.standard_normal((4, 2)), rng.standard_normal((5, 3))
        np.testing.assert_allclose(tucker_reconstruct(g, [u, v]).data, u @ g @ v.T, rtol=1e-12)

    def test_factor_core_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            tucker_reconstruct(np.zeros((2, 3)), [np.eye(2), np.eye(2)])


class TestDtf1:
    def test_header_layout(self):
        payload = encode_dtf1(DenseTensor.from_linear([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], [2, 3]))
        assert payload[:4] == b'DTF1'
        assert payload[4:8] == (2).to_bytes(4, 'little')
        assert payload[8:16] == (2).to_bytes(8, 'little')
        assert payload[16:24] == (3).to_bytes(8, 'little')
        assert np.frombuffer(payload[24:], dtype='<f8').tolist() == [1, 2, 3, 4, 5, 6]

    def test_file_and_base64_round_trip(self, rng, tmp_path):
        t = DenseTensor(rng.standard_normal((3, 1, 4)))
        path = write_dtf1(tmp_path / 'coef.dtf', t)
        np.testing.assert_array_equal(read_dtf1(path).data, t.data)
        np.testing.assert_array_equal(from_base64(to_base64(t)).data, t.data)

    def test_bad_magic(self):
        with pytest.raises(TensorFormatError):
            decode_dtf1(b'XXXX' + bytes(16))

    def test_truncated_body(self):
        payload = encode_dtf1(DenseTensor(np.ones((2, 2))))
        with pytest.raises(TensorFormatError):
            decode_dtf1(payload[:-8])
